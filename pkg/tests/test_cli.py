"""CLI behavior: argument parsing, config loading, exit codes, output files."""

import json

import pytest

from opsyslab import cli, experiments


def run_cli(argv, monkeypatch=None, env_seed=None):
    if monkeypatch is not None:
        if env_seed is None:
            monkeypatch.delenv("OPSYS_SEED", raising=False)
        else:
            monkeypatch.setenv("OPSYS_SEED", env_seed)
    return cli.main(argv)


def test_list_prints_all_experiments(capsys, monkeypatch):
    code = run_cli(["list"], monkeypatch)
    out = capsys.readouterr().out
    assert code == cli.EXIT_OK
    for name in experiments.REGISTRY:
        assert name in out


def test_run_unknown_experiment_is_usage_error(capsys, monkeypatch):
    code = run_cli(["run", "exp_nonsense", "--seed", "1"], monkeypatch)
    assert code == cli.EXIT_USAGE
    assert "unknown experiment" in capsys.readouterr().err


def test_run_requires_seed(capsys, monkeypatch):
    code = run_cli(["run", "exp_hope"], monkeypatch)
    assert code == cli.EXIT_USAGE
    assert "seed" in capsys.readouterr().err


def test_run_writes_json_report(tmp_path, capsys, monkeypatch):
    out = tmp_path / "report.json"
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(
        "[exp_hope]\n"
        "trials = 4\nn_values = 1\nk_values = 1\np_values = 2\n"
        "bootstrap_resamples = 20\n"
    )
    code = run_cli(
        ["run", "exp_hope", "--seed", "7", "--config", str(cfg),
         "--out", str(out)],
        monkeypatch,
    )
    assert code == cli.EXIT_OK
    printed = capsys.readouterr().out
    assert "PASS" in printed
    loaded = json.loads(out.read_text())
    assert loaded["config"]["seed"] == 7
    assert loaded["config"]["trials"] == 4
    assert loaded["passed"] is True


def test_run_writes_csv(tmp_path, monkeypatch):
    out = tmp_path / "report.csv"
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(
        "[exp_hope]\ntrials = 4\nn_values = 1\nk_values = 1\np_values = 2\n"
        "bootstrap_resamples = 20\n"
    )
    code = run_cli(
        ["run", "exp_hope", "--seed", "7", "--config", str(cfg),
         "--out", str(out), "--format", "csv"],
        monkeypatch,
    )
    assert code == cli.EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert "pair" in lines[0]
    assert len(lines) > 1


def test_env_seed_overrides_flag(tmp_path, monkeypatch):
    out = tmp_path / "r.json"
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(
        "[exp_hope]\ntrials = 2\nn_values = 1\nk_values = 1\np_values = 2\n"
        "bootstrap_resamples = 20\n"
    )
    code = run_cli(
        ["run", "exp_hope", "--seed", "7", "--config", str(cfg),
         "--out", str(out)],
        monkeypatch, env_seed="99",
    )
    assert code == cli.EXIT_OK
    assert json.loads(out.read_text())["config"]["seed"] == 99


def test_bad_env_seed_is_usage_error(capsys, monkeypatch):
    code = run_cli(["run", "exp_hope", "--seed", "1"], monkeypatch,
                   env_seed="not-a-number")
    assert code == cli.EXIT_USAGE
    assert "OPSYS_SEED" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[exp_hope]\nshenanigans = 12\n")
    code = run_cli(
        ["run", "exp_hope", "--seed", "3", "--config", str(cfg)], monkeypatch
    )
    assert code == cli.EXIT_USAGE
    assert "shenanigans" in capsys.readouterr().err


def test_missing_config_file_is_usage_error(capsys, monkeypatch):
    code = run_cli(
        ["run", "exp_hope", "--seed", "3", "--config", "/nope/missing.ini"],
        monkeypatch,
    )
    assert code == cli.EXIT_USAGE
    assert "not found" in capsys.readouterr().err


def test_failed_experiment_exit_code(monkeypatch, tmp_path):
    # force a failing report without running anything heavy
    def fake(cfg):
        return experiments.ExperimentReport(
            config=cfg.to_json(), records=[{"verdict": "infeasible"}],
            summary={}, passed=False, wall_time=0.0,
        )

    monkeypatch.delenv("OPSYS_SEED", raising=False)
    monkeypatch.setitem(experiments.REGISTRY, "exp_hope", (fake, "stub"))
    code = cli.main(["run", "exp_hope", "--seed", "1"])
    assert code == cli.EXIT_FAILED


def test_indeterminate_fraction_exit_code(monkeypatch):
    def fake(cfg):
        recs = [{"verdict": "indeterminate"}] * 3 + [{"verdict": "feasible"}] * 7
        return experiments.ExperimentReport(
            config=cfg.to_json(), records=recs, summary={}, passed=True,
            wall_time=0.0, indeterminate_fraction=0.3,
        )

    monkeypatch.delenv("OPSYS_SEED", raising=False)
    monkeypatch.setitem(experiments.REGISTRY, "exp_hope", (fake, "stub"))
    code = cli.main(["run", "exp_hope", "--seed", "1"])
    assert code == cli.EXIT_INDETERMINATE


def test_no_command_prints_usage(capsys, monkeypatch):
    code = run_cli([], monkeypatch)
    assert code == cli.EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()
