"""Constants for cocyclab."""

import math

# Report formats
REPORT_SCHEMA_VERSION = 1
SNAPSHOT_SCHEMA_VERSION = 1
GAP_CSV_HEADER = ["stage", "T", "G", "le_corrected", "le_degenerate", "gap", "ratio"]

# Frequency presets (partial quotient repeated over the prefix)
FREQUENCY_PRESETS = {"golden": 1, "silver": 2}
DEFAULT_PREFIX_LENGTH = 40

# Desk-scale experiment defaults
DEFAULT_LAMBDA = 1.0e12
DEFAULT_EPSILON = 0.8
DEFAULT_DELTA = 0.05
DEFAULT_BOUND_M = 2
DEFAULT_NU = 0.5
DEFAULT_BETA = 1.2
DEFAULT_START_INDEX = 6
DEFAULT_AMPLITUDE = 1.0e-4
DEFAULT_C1 = 0.3
DEFAULT_SCHEDULE_COEFF = 1.0e4
DEFAULT_STAGES = 3
DEFAULT_T = 10_000
DEFAULT_G = 512

# Grids
DEFAULT_CHEBYSHEV_NODES = 65
DEFAULT_AUDIT_GRID = 33
DEFAULT_RETURN_GRID = 64
DEFAULT_SEMINORM_KMAX = 40
DEFAULT_SEMINORM_GRID = 2048
RETURN_CAP_EXPONENT = 4

# Tolerances
PROJECTIVE_TOL = 1e-9
DETERMINANT_TOL = 1e-12
INTERPOLATION_TOL = 1e-6
ALIGNMENT_TOL = 1e-6
CONJUGATION_TOL = 1e-8

# Numerical guards
MAX_RECONSTRUCT_LOG_SIGMA = 300.0
EXP_UNDERFLOW = 745.0
ORACLE_DPS = 50

# Constant in front of the Gevrey seminorm
SEMINORM_PREFACTOR = 4.0 * math.pi**2 / 3.0
