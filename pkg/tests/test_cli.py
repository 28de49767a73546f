import json
import os

import pytest

from nsinflow.cli import (EXIT_NONCONVERGENCE, EXIT_OK, EXIT_USAGE, emit_plot_script, main, parse_config,
                          read_config_file)


@pytest.fixture(autouse=True)
def no_env_out(monkeypatch):
    monkeypatch.delenv("NSINFLOW_OUT", raising=False)


def test_defaults_resolve_rho_b():
    cfg = parse_config()
    assert cfg.rho_b == pytest.approx(1.0 + 0.05**2)
    assert (cfg.n, cfg.gamma, cfg.N, cfg.r_max, cfg.cfl, cfg.t_end) == (2, 2.0, 4097, 200.0, 0.4, 100.0)


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ngamma = 1.4\nu_b = 0.1   # inflow\nout = \"somewhere\"\n")
    assert read_config_file(path) == {"gamma": 1.4, "u_b": 0.1, "out": "somewhere"}
    cfg = parse_config(path, {"gamma": "1.8", "N": "2049"})
    assert cfg.gamma == 1.8 and cfg.u_b == 0.1 and cfg.N == 2049
    assert cfg.rho_b == pytest.approx(1.01)


def test_empty_file_and_flags(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path, {"n": "3", "u_b": "0.02", "rho_b": "1.0"})
    assert (cfg.n, cfg.u_b, cfg.rho_b) == (3, 0.02, 1.0)


def test_config_errors(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("gama = 2\n")
    with pytest.raises(ValueError, match="valid keys"):
        parse_config(path)
    with pytest.raises(ValueError, match="gamma"):
        parse_config(None, {"gamma": "0.5"})
    with pytest.raises(ValueError, match="inflow"):
        parse_config(None, {"u_b": "0"})
    with pytest.raises(ValueError):
        parse_config(None, {"N": "10.5"})


def test_env_overrides_out(monkeypatch, tmp_path):
    monkeypatch.setenv("NSINFLOW_OUT", str(tmp_path / "env"))
    assert parse_config(None, {"out": "flag"}).out == str(tmp_path / "env")


def test_help_and_usage(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "stationary" in capsys.readouterr().out
    assert main(["nonsense"]) == EXIT_USAGE
    assert main(["stationary", "--gamma", "0.5"]) == EXIT_USAGE


def test_stationary_command(tmp_path):
    out = tmp_path / "st"
    assert main(["stationary", "--N", "1025", "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "stationary.json").read_text())
    assert summary["converged"] and summary["r_star"] > 1
    assert {"eta", "eta_r", "u_tilde"} <= set(summary["decay_slopes"])
    assert "regime_flags" in summary
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["N"] == 1025 and manifest["rho_b"] == pytest.approx(1.0025)
    assert (out / "profile.csv").exists()


def test_huge_inflow_does_not_crash(tmp_path):
    with pytest.warns(RuntimeWarning):
        code = main(["stationary", "--u-b", "10", "--N", "513", "--out", str(tmp_path / "big")])
    assert code in (EXIT_OK, EXIT_NONCONVERGENCE)
    summary = json.loads((tmp_path / "big" / "stationary.json").read_text())
    assert "regime_flags" in summary


def test_evolve_smoke_and_plot(tmp_path):
    out = tmp_path / "ev"
    code = main(["evolve", "--N", "1025", "--t-end", "1", "--amplitude", "0", "--dump-interval", "0.5",
                 "--out", str(out)])
    assert code == EXIT_OK
    names = set(os.listdir(out))
    assert {"manifest.json", "profile.csv", "trajectory.csv", "energy.csv", "verdict.json", "lagrangian.csv",
            "plot_run.py", "snapshots"} <= names
    assert len(os.listdir(out / "snapshots")) == 3
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,sup_gap_rho,sup_gap_u,NE,ME_accum,relative_energy,D"
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["verdict"]["applicable"] is False
    script = (out / "plot_run.py").read_bytes()
    for name in (b"profile.csv", b"trajectory.csv", b"energy.csv"):
        assert name in script
    emit_plot_script(out)
    assert (out / "plot_run.py").read_bytes() == script


def test_evolve_bad_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["evolve", "--N", "513", "--t-end", "0.1", "--out", str(blocker / "sub")]) == EXIT_USAGE


def test_plot_requires_csvs(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_plot_script(tmp_path)
    assert main(["plot", str(tmp_path)]) == EXIT_USAGE


def test_verify_lists_and_filters():
    from nsinflow.acceptance import CRITERIA, select

    assert sorted(CRITERIA) == list(range(1, 12))
    assert select(["decay"]) == [3]
    assert select(["6", "energy-b"]) == [6, 7]
    with pytest.raises(ValueError, match="valid"):
        select(["nope"])
