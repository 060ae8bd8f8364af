"""Tests for CLI commands."""

import csv
import json
import tempfile
from pathlib import Path
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from cocyclab.cli import cli
from cocyclab.constants import GAP_CSV_HEADER
from cocyclab.errors import BoundViolated
from cocyclab.models import InequalityCheck

SMALL_RUN = """\
# small, fast construction
lambda = 1e12
stages = 1
T = 120
G = 24
chebyshev_nodes = 33
audit_grid = 9
return_grid = 16
interpolation_tol = 1e-6
alignment_tol = 1e-6
conjugation_tol = 1e-6
"""


@pytest.fixture
def runner():
    """Create a CLI runner."""
    return CliRunner()


@pytest.fixture
def workdir():
    """Create a temporary directory holding a small run config."""
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir)
        (path / "small.conf").write_text(SMALL_RUN, encoding="utf-8")
        yield path


def load_report(out: Path) -> dict:
    """Read report.json from an output directory."""
    return json.loads((out / "report.json").read_text(encoding="utf-8"))


def test_cli_group(runner):
    """Test that CLI group runs."""
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    assert "cocyclab" in result.output
    for command in ("cf", "bumps", "construct", "le", "gap", "props"):
        assert command in result.output


def test_gap_command_help(runner):
    """Test gap command help."""
    result = runner.invoke(cli, ["gap", "--help"])
    assert result.exit_code == 0
    assert "discontinuity experiment" in result.output


def test_missing_config_file(runner, workdir):
    """Test a config path that does not exist is a usage error."""
    result = runner.invoke(cli, ["cf", "--config", str(workdir / "missing.conf"), "--out", str(workdir / "out")])
    assert result.exit_code == 2


def test_invalid_config_value(runner, workdir):
    """Test a value outside its range exits 2 before any work."""
    bad = workdir / "bad.conf"
    bad.write_text("epsilon = 2\n", encoding="utf-8")
    result = runner.invoke(cli, ["props", "--config", str(bad), "--out", str(workdir / "out")])
    assert result.exit_code == 2
    assert "Invalid configuration" in result.output
    assert not (workdir / "out" / "report.json").exists()


def test_malformed_config_file(runner, workdir):
    """Test a config line without '=' exits 2."""
    bad = workdir / "bad.conf"
    bad.write_text("lambda 1e6\n", encoding="utf-8")
    result = runner.invoke(cli, ["cf", "--config", str(bad), "--out", str(workdir / "out")])
    assert result.exit_code == 2


def test_props_is_reproducible(runner, workdir):
    """Test the same seed writes byte-identical reports."""
    reports = []
    for name in ("first", "second"):
        out = workdir / name
        args = ["props", "--seed", "42", "--suite", "partition_identity", "--trials", "5", "--out", str(out)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        reports.append((out / "report.json").read_bytes())
    assert reports[0] == reports[1]
    report = json.loads(reports[0])
    assert report["seed"] == 42
    assert [s["name"] for s in report["suites"]] == ["partition_identity"]
    assert report["passed"] is True


def test_props_echoes_config(runner, workdir):
    """Test the effective configuration is written next to the report."""
    out = workdir / "out"
    result = runner.invoke(cli, ["props", "--seed", "5", "--suite", "plateau", "--trials", "3", "--out", str(out)])
    assert result.exit_code == 0
    echo = (out / "config.echo").read_text(encoding="utf-8")
    assert "seed = 5\n" in echo
    assert 'subcommand = "props"\n' in echo


@patch("cocyclab.cli.run_all")
def test_props_runtime_failure(mock_run_all, runner, workdir):
    """Test a numerical failure exits 3."""
    mock_run_all.side_effect = BoundViolated("margin -1")
    result = runner.invoke(cli, ["props", "--out", str(workdir / "out")])
    assert result.exit_code == 3
    assert "margin -1" in result.output


def test_cf(runner, workdir):
    """Test the return scan reports r_n >= q_n/2."""
    out = workdir / "out"
    result = runner.invoke(cli, ["cf", "--config", str(workdir / "small.conf"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = load_report(out)
    assert report["subcommand"] == "cf"
    (returns,) = report["returns"]
    assert 2 * returns["min_return"] >= returns["q"]
    assert report["convergents"][0] == [1, 1]


def test_bumps(runner, workdir):
    """Test the bump checks pass at a low derivative order."""
    out = workdir / "out"
    result = runner.invoke(cli, ["bumps", "--n-max", "10", "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = load_report(out)
    assert {row["nu"] for row in report["bumps"]} == {0.3, 0.5, 0.8}
    assert len(report["phi0_decay"]) == 3


def test_le_initial_stage(runner, workdir):
    """Test the exponent of the initial stage is written to the report."""
    out = workdir / "out"
    args = ["le", "--config", str(workdir / "small.conf"), "--kind", "initial", "--T", "50", "--G", "8"]
    result = runner.invoke(cli, args + ["--out", str(out)])
    assert result.exit_code == 0, result.output
    report = load_report(out)
    assert report["kind"] == "initial"
    assert report["estimate"]["T"] == 50
    assert report["estimate"]["mean"] <= report["log_lambda"] + 1e-12


def test_le_rejects_early_stage(runner, workdir):
    """Test a stage before N exits 2."""
    result = runner.invoke(cli, ["le", "--stage", "2", "--out", str(workdir / "out")])
    assert result.exit_code == 2


def test_construct(runner, workdir):
    """Test the construction report lists initial, corrected and degenerate stages."""
    out = workdir / "out"
    args = ["construct", "--config", str(workdir / "small.conf"), "--snapshots", "--out", str(out)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    report = load_report(out)
    assert [entry["kind"] for entry in report["stages"]] == ["initial", "corrected", "degenerate"]
    assert len(list((out / "snapshots").glob("*.json"))) == 2


def test_gap_writes_artifacts(runner, workdir):
    """Test the gap experiment writes its report, CSV and plot."""
    out = workdir / "out"
    result = runner.invoke(cli, ["gap", "--config", str(workdir / "small.conf"), "--out", str(out)])
    assert result.exit_code in (0, 1), result.output
    report = load_report(out)
    assert report["passed"] == (result.exit_code == 0)
    with open(out / "gap.csv", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == GAP_CSV_HEADER
    assert len(rows) == 2
    assert (out / "gap.svg").read_text(encoding="utf-8").startswith("<svg")


@pytest.mark.parametrize(
    "command, target",
    [
        ("cf", "cocyclab.cli.nonresonant_fraction"),
        ("gap", "cocyclab.cli.le_gap_experiment"),
        ("construct", "cocyclab.cli.build_stages"),
    ],
)
def test_value_error_exits_3(runner, workdir, command, target):
    """Test a ValueError inside a command is a runtime failure, not a traceback."""
    with patch(target, side_effect=ValueError("grid too small")):
        args = [command, "--config", str(workdir / "small.conf"), "--out", str(workdir / "out")]
        result = runner.invoke(cli, args)
    assert result.exit_code == 3
    assert "grid too small" in result.output
    assert not isinstance(result.exception, ValueError)


@patch("cocyclab.cli.collapse_check")
def test_construct_fails_on_collapse_miss(mock_collapse, runner, workdir):
    """Test a degenerate block above its collapse bound fails the construction verdict."""
    mock_collapse.return_value = InequalityCheck(name="collapse", lhs=538.6, rhs=0.69, passed=False)
    out = workdir / "out"
    result = runner.invoke(cli, ["construct", "--config", str(workdir / "small.conf"), "--out", str(out)])
    assert result.exit_code == 1
    assert "collapse bound not met" in result.output
    report = load_report(out)
    assert report["passed"] is False
    assert report["checks"][0]["collapse"]["passed"] is False


def test_construct_collapse_bound_holds(runner, workdir):
    """Test the real collapse check passes on every degenerate stage."""
    out = workdir / "out"
    result = runner.invoke(cli, ["construct", "--config", str(workdir / "small.conf"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert all(check["collapse"]["passed"] for check in load_report(out)["checks"])


def test_gap_default_config(runner, workdir):
    """Test the gap experiment at the shipped defaults passes with a positive gap at every stage."""
    out = workdir / "out"
    result = runner.invoke(cli, ["gap", "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = load_report(out)
    assert report["passed"] is True
    rows = report["gap"]["rows"]
    assert [row["stage"] for row in rows] == [6, 7, 8]
    for row in rows:
        assert row["le_corrected"] - row["le_degenerate"] > 0.0
        assert row["localized_gap"] > 0.0
    for entry in report["diagnostics"]:
        if entry["growth"] is not None:
            assert len(entry["growth"]["margins"]) == len(entry["growth"]["log_norms"])
