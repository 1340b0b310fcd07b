import numpy as np
import pytest
from click.testing import CliRunner

from kpist import cli, validation
from kpist.fileio import RunConfig, load_field, load_spectral, read_metrics, save_config
from kpist.validation import CriterionResult


@pytest.fixture
def runner():
    return CliRunner()


def small_config(tmp_path, **overrides):
    settings = dict(Nx=16, Ny=128, Ly=12.0, n_max=2, amplitude=0.02, times=[0.0], out=str(tmp_path / "out"))
    settings.update(overrides)
    path = tmp_path / "run.ini"
    save_config(RunConfig(**settings), path)
    return path


def manifest_status(out):
    for line in (out / "manifest.ini").read_text().splitlines():
        if line.startswith("status"):
            return line.split("=", 1)[1].strip()
    return None


def test_forward_of_zero_potential_gives_zero_data(tmp_path, runner):
    cfg = small_config(tmp_path, potential="zero")
    result = runner.invoke(cli.main, ["forward", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    data = load_spectral(out / "spectral_t0.csv")
    assert np.abs(data.G).max() == 0.0
    assert np.abs(load_field(out / "u0.field").values).max() == 0.0
    assert (out / "decay.csv").exists()
    assert manifest_status(out) == "complete"


def test_solve_round_trip_metric(tmp_path, runner):
    cfg = small_config(tmp_path)
    result = runner.invoke(cli.main, ["solve", "--config", str(cfg), "--times", "0"])
    assert result.exit_code == 0, result.output
    rows = read_metrics(tmp_path / "out" / "metrics.csv")
    assert len(rows) == 1 and rows[0][0] == 0.0
    assert rows[0][1] <= 2e-2
    assert (tmp_path / "out" / "u_t0.field").exists()


def test_missing_config_exits_with_config_status(tmp_path, runner):
    result = runner.invoke(cli.main, ["forward", "--config", str(tmp_path / "nope.ini")])
    assert result.exit_code == cli.EXIT_CONFIG


def test_unknown_config_key_exits_with_config_status(tmp_path, runner):
    path = tmp_path / "bad.ini"
    path.write_text("[grid]\nNz = 4\n")
    result = runner.invoke(cli.main, ["forward", "--config", str(path)])
    assert result.exit_code == cli.EXIT_CONFIG
    assert "Nz" in result.output


def test_large_potential_refused_without_force(tmp_path, runner):
    cfg = small_config(tmp_path, amplitude=0.2)
    result = runner.invoke(cli.main, ["forward", "--config", str(cfg)])
    assert result.exit_code == cli.EXIT_CONFIG
    assert "--force" in result.output
    assert manifest_status(tmp_path / "out").startswith("failed")


def test_iteration_cap_gives_convergence_status(tmp_path, runner):
    cfg = small_config(tmp_path)
    result = runner.invoke(cli.main, ["forward", "--config", str(cfg), "--max-iter", "1"])
    assert result.exit_code == cli.EXIT_CONVERGENCE, result.output
    assert manifest_status(tmp_path / "out").startswith("failed")


@pytest.mark.parametrize("times", ["0.2,0.1", "-1", "a,b"])
def test_bad_times_are_config_errors(tmp_path, runner, times):
    cfg = small_config(tmp_path)
    result = runner.invoke(cli.main, ["forward", "--config", str(cfg), "--times", times])
    assert result.exit_code == cli.EXIT_CONFIG


def test_validate_subset_writes_table(tmp_path, runner):
    result = runner.invoke(cli.main, ["validate", "--only", "1,2", "--out", str(tmp_path / "v")])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "v" / "validation.txt").read_text().splitlines()
    assert len(lines) == 2 and all(line.startswith("[PASS]") for line in lines)


def test_validate_failure_exit_status(tmp_path, runner, monkeypatch):
    monkeypatch.setitem(validation.CRITERIA, 1, lambda ctx: CriterionResult(1, "forced", False, "forced failure"))
    result = runner.invoke(cli.main, ["validate", "--only", "1", "--out", str(tmp_path / "v")])
    assert result.exit_code == cli.EXIT_VALIDATION
    assert "[FAIL]" in result.output


def test_validate_rejects_unknown_criterion(tmp_path, runner):
    result = runner.invoke(cli.main, ["validate", "--only", "99", "--out", str(tmp_path / "v")])
    assert result.exit_code == cli.EXIT_CONFIG
