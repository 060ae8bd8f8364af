"""Tests for config module."""

import csv
import json
import tempfile
from pathlib import Path

import pytest
from pydantic import ValidationError

from cocyclab.config import OutputDir, load_run_config, parse_config_text
from cocyclab.constants import GAP_CSV_HEADER, REPORT_SCHEMA_VERSION
from cocyclab.errors import ConfigError
from cocyclab.models import GapRow, RunConfig


def test_parse_json_object():
    """Test a JSON object is taken as is."""
    assert parse_config_text('{"lambda": 1e8, "nu": 0.4}') == {"lambda": 1e8, "nu": 0.4}


def test_parse_key_value_lines():
    """Test key = value lines with comments, JSON literals and bare strings."""
    text = """
    # stage range
    start_index = 7
    partial_quotients = [1, 2, 1, 2, 1, 2, 1, 2, 1, 2]
    frequency = silver
    epsilon=0.5
    """
    data = parse_config_text(text)
    assert data == {
        "start_index": 7,
        "partial_quotients": [1, 2, 1, 2, 1, 2, 1, 2, 1, 2],
        "frequency": "silver",
        "epsilon": 0.5,
    }


@pytest.mark.parametrize(
    "text",
    [
        "nu = 0.5\nnu = 0.6",
        "nu 0.5",
        "= 0.5",
        '{"nu": 0.5',
        "[1, 2]",
    ],
)
def test_parse_errors(text):
    """Test malformed config bodies raise ConfigError."""
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_load_defaults():
    """Test no file and no overrides gives the default run."""
    config = load_run_config()
    assert config == RunConfig()


def test_load_file_with_overrides():
    """Test file values, the lam spelling and flag overrides."""
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "run.conf"
        path.write_text("lam = 1e8\nepsilon = 0.7\nT = 500\n", encoding="utf-8")
        config = load_run_config(path, {"T": 250, "G": None, "seed": 3})
    assert config.lam == 1e8
    assert config.epsilon == 0.7
    assert config.T == 250
    assert config.G == RunConfig().G
    assert config.seed == 3


def test_load_missing_file():
    """Test an unreadable path raises ConfigError."""
    with tempfile.TemporaryDirectory() as tmpdir:
        with pytest.raises(ConfigError):
            load_run_config(Path(tmpdir) / "missing.conf")


@pytest.mark.parametrize(
    "overrides",
    [{"epsilon": 2.0}, {"lambda": 0.5}, {"nu": 1.0}, {"T": 0}, {"stages": 100}, {"unknown": 1}],
)
def test_load_rejects_bad_values(overrides):
    """Test model constraints surface as validation errors."""
    with pytest.raises(ValidationError):
        load_run_config(None, overrides)


def test_echo_reparses():
    """Test config.echo loads back to the same configuration."""
    config = load_run_config(None, {"lambda": 1e9, "seed": 11, "subcommand": "gap"})
    with tempfile.TemporaryDirectory() as tmpdir:
        out = OutputDir(Path(tmpdir) / "out")
        path = out.echo_config(config)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == sorted(lines)
        assert "lambda = 1000000000.0" in lines
        assert load_run_config(path) == config


def test_output_dir_created():
    """Test the output directory and its file names."""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = OutputDir(Path(tmpdir) / "nested" / "out")
        assert out.out_dir.exists()
        assert out.report_file.name == "report.json"
        assert out.csv_file.name == "gap.csv"
        assert out.svg_file.name == "gap.svg"
        assert out.echo_file.name == "config.echo"


def test_report_roundtrip():
    """Test report.json carries the schema version with sorted keys."""
    with tempfile.TemporaryDirectory() as tmpdir:
        out = OutputDir(Path(tmpdir))
        assert not out.report_file.exists()
        out.save_report({"verdict": "pass", "alpha": [1, 2]})
        text = out.report_file.read_text(encoding="utf-8")
    data = json.loads(text)
    assert data == {"schema_version": REPORT_SCHEMA_VERSION, "verdict": "pass", "alpha": [1, 2]}
    assert list(json.loads(text)) == ["alpha", "schema_version", "verdict"]
    assert text.endswith("\n")


def test_gap_csv():
    """Test gap.csv has the fixed header and one row per stage."""
    rows = [
        GapRow(stage=6, T=100, G=8, le_corrected=27.0, le_degenerate=20.0, log_lambda=27.6),
        GapRow(stage=7, T=100, G=8, le_corrected=27.1, le_degenerate=21.5, log_lambda=27.6),
    ]
    with tempfile.TemporaryDirectory() as tmpdir:
        out = OutputDir(Path(tmpdir))
        path = out.save_gap_csv(rows)
        with open(path, encoding="utf-8", newline="") as f:
            records = list(csv.reader(f))
    assert records[0] == GAP_CSV_HEADER
    assert len(records) == 3
    assert records[1][:3] == ["6", "100", "8"]
    assert float(records[1][5]) == pytest.approx(7.0)
    assert float(records[2][6]) == pytest.approx(5.6 / 27.6)
