"""Configuration loading and output directory management for cocyclab."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional

from cocyclab.constants import GAP_CSV_HEADER, REPORT_SCHEMA_VERSION
from cocyclab.errors import ConfigError
from cocyclab.models import GapRow, RunConfig

logger = logging.getLogger(__name__)


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse a config file body, either one JSON object or flat key = value lines.

    Values of key = value lines are JSON literals when they parse as such (numbers, lists, true/false,
    quoted strings) and bare strings otherwise. Lines starting with # are comments.

    Raises:
        ConfigError: On malformed JSON, a line without '=' or a repeated key
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON config: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("JSON config must be an object")
        return data

    data: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        if key in data:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError:
            data[key] = value
    return data


def load_run_config(path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Load a run configuration from a file and apply command-line overrides.

    Args:
        path: Config file, or None for all defaults
        overrides: Flag values; entries that are None are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file cannot be read or parsed
        pydantic.ValidationError: If a value breaks a model constraint
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        data = parse_config_text(text)
        logger.debug("loaded %d keys from %s", len(data), path)
    # overrides are keyed by the alias
    if "lam" in data and "lambda" not in data:
        data["lambda"] = data.pop("lam")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return RunConfig.model_validate(data)


class OutputDir:
    """Manage the artifacts of one cocyclab run."""

    def __init__(self, out_dir: Optional[Path] = None):
        """Initialize the output directory, creating it if needed."""
        if out_dir is None:
            out_dir = Path.cwd() / "cocyclab-out"
        self.out_dir = Path(out_dir)
        self.report_file = self.out_dir / "report.json"
        self.csv_file = self.out_dir / "gap.csv"
        self.svg_file = self.out_dir / "gap.svg"
        self.echo_file = self.out_dir / "config.echo"
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def save_report(self, report: dict[str, Any]) -> Path:
        """Write report.json with sorted keys and the schema version."""
        payload = {"schema_version": REPORT_SCHEMA_VERSION, **report}
        with open(self.report_file, "w", encoding="utf-8") as f:
            f.write(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
        return self.report_file

    def save_gap_csv(self, rows: Iterable[GapRow]) -> Path:
        """Write gap.csv, one line per stage."""
        with open(self.csv_file, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=GAP_CSV_HEADER, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row.csv_row())
        return self.csv_file

    def save_svg(self, svg: str) -> Path:
        """Write gap.svg."""
        self.svg_file.write_text(svg, encoding="utf-8")
        return self.svg_file

    def echo_config(self, config: RunConfig) -> Path:
        """Write the effective configuration as config.echo."""
        self.echo_file.write_text(config.to_echo(), encoding="utf-8")
        return self.echo_file
