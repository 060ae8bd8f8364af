"""Exceptions raised by cocyclab."""

from typing import Any


class CocyclabError(Exception):
    """Base class for all cocyclab failures."""


class ReturnNotFound(CocyclabError):
    """No return to the critical interval within the iteration cap."""

    def __init__(self, x: float, n: int, cap: int):
        super().__init__(f"no return of x={x:.12g} to I_{n} within {cap} iterations")
        self.x = x
        self.n = n
        self.cap = cap


class NonUnimodular(CocyclabError):
    """A dense matrix does not have determinant one."""


class RepresentationOverflow(CocyclabError):
    """A log-polar matrix is too large to be written out densely."""


class PreconditionFailed(CocyclabError):
    """A check was called on inputs that violate its hypothesis."""


class DomainViolation(CocyclabError):
    """A jet operation was applied outside the domain of the outer function."""


class BoundViolated(CocyclabError):
    """A proven inequality failed numerically, which points at an implementation error."""


class NotHyperbolic(CocyclabError):
    """A return block failed its hyperbolicity audit."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class InterpolationDiverged(CocyclabError):
    """The correction interpolant does not reproduce the sampled mismatch."""

    def __init__(self, n: int, residual: float, tolerance: float):
        super().__init__(f"stage {n}: interpolation residual {residual:.3e} exceeds {tolerance:.3e}")
        self.n = n
        self.residual = residual
        self.tolerance = tolerance


class ConfigError(CocyclabError):
    """A configuration file could not be parsed."""
