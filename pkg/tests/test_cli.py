import json

import pytest

from corrsets import cli


def run(tmp_path, *argv):
    return cli.main([*argv, "--out-dir", str(tmp_path)])


@pytest.fixture
def small_config(tmp_path):
    from corrsets.harness import PRESETS

    data = dict(PRESETS["example2"], trajectories=100, horizon=12, eta_grid_size=10)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


@pytest.mark.parametrize("command,expected", [
    ("bound", ["bound.json"]),
    ("invariant", ["invariant.csv", "invariant.json"]),
    ("simulate", ["violations.csv"]),
])
def test_subcommands(tmp_path, small_config, command, expected):
    out = tmp_path / "out"
    assert run(out, command, "--config", str(small_config)) == 0
    assert sorted(p.name for p in out.iterdir()) == expected


def test_reach(tmp_path, small_config):
    out = tmp_path / "out"
    assert run(out, "reach", "--config", str(small_config), "--chebyshev") == 0
    assert len(list(out.glob("reach_pv*.csv"))) == 5


def test_pipeline_flags(tmp_path, small_config, capsys):
    out = tmp_path / "out"
    code = run(out, "pipeline", "--config", str(small_config), "--seed", "3", "--jobs", "2",
               "--conservative", "--reference-bound")
    assert code == 0
    summary = json.loads((out / "pipeline.json").read_text())
    assert summary["config"]["seed"] == 3
    assert summary["config"]["conservative"] is True
    assert summary["bound"]["source"] == "reference"
    assert "max violation frequency" in capsys.readouterr().out


def test_config_error_exit(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"A": [[0.5]], "p_v": [2.0], "model": {}}))
    assert run(tmp_path, "bound", "--config", str(bad)) == cli.EXIT_CONFIG


def test_missing_config_exit(tmp_path):
    assert run(tmp_path, "bound", "--config", str(tmp_path / "none.json")) == cli.EXIT_CONFIG


def test_infeasible_exit(tmp_path):
    cfg = tmp_path / "inf.json"
    # eta grid of one point at rho(A)^2 for a non-normal A: every grid point fails
    cfg.write_text(json.dumps({
        "A": [[0.25, 0.0], [0.1, 0.3]], "p_v": [0.1], "eta_grid_size": 1,
        "model": {"Gamma_tilde": [[1.0, 0.0], [0.0, 1.0]], "alpha": 0.0, "beta": 1.0, "gamma": 0.5},
    }))
    assert run(tmp_path, "bound", "--config", str(cfg)) == cli.EXIT_INFEASIBLE


def test_exit_code_mapping():
    from corrsets.errors import ConfigError, InfeasibleError, NumericalError, StageError

    assert cli.exit_code(StageError("bound", InfeasibleError("x"))) == 3
    assert cli.exit_code(StageError("bound", NumericalError("x"))) == 4
    assert cli.exit_code(ConfigError("x")) == 2


def test_requires_source(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["bound"])


def test_bad_jobs(tmp_path):
    assert run(tmp_path, "bound", "--preset", "example1", "--jobs", "0") == cli.EXIT_CONFIG
