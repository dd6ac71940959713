"""Experiment runner: config validation, subcommands, manifests, reproducibility."""

import filecmp
from pathlib import Path

import pytest

from stirringlab.cli import ConfigError, ExperimentConfig, load_config, main


BASE_CONFIG = """
# tiny run
model.N = 3
model.K = 2
model.j = 1.0
model.u0 = linear
model.u0_a = 0.25
model.u0_b = 0.25
run.t_end = 0.2
run.snapshot_times = 0.1,0.2
run.M = 64
run.master_seed = 12345
run.threads = 1
"""


def write_config(tmp_path, text=BASE_CONFIG, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfigParsing:
    def test_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.get("model.N", cast=int) == 3
        assert cfg.get_list("run.snapshot_times") == [0.1, 0.2]

    def test_unknown_key_named(self, tmp_path):
        with pytest.raises(ConfigError, match="model.Q"):
            load_config(write_config(tmp_path, BASE_CONFIG + "\nmodel.Q = 7\n"))

    def test_missing_required_key_named(self):
        with pytest.raises(ConfigError, match="model.K"):
            ExperimentConfig({"model.j": "1.0"})

    def test_duplicate_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicate"):
            load_config(write_config(tmp_path, BASE_CONFIG + "\nmodel.N = 4\n"))

    def test_u0_presets(self, tmp_path):
        cfg = load_config(write_config(tmp_path, BASE_CONFIG.replace("model.u0 = linear", "model.u0 = constant") + "model.u0_value = 0.5\n"))
        assert cfg.u0()(0.3) == 0.5
        bad = BASE_CONFIG.replace("model.u0_b = 0.25", "model.u0_b = 2.0")
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, bad)).u0()

    def test_exit_code_2_on_config_error(self, tmp_path, capsys):
        path = write_config(tmp_path, BASE_CONFIG + "\nmodel.bogus = 1\n")
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "model.bogus" in capsys.readouterr().err

    def test_exit_code_3_on_capacity_error(self, tmp_path):
        big = BASE_CONFIG.replace("model.N = 3", "model.N = 9")
        big += "study.sites = 0,1\nstudy.times = 0.1\n"
        path = write_config(tmp_path, big)
        rc = main(["oracle", "--config", str(path), "--out", str(tmp_path / "o")])
        assert rc == 3


class TestSubcommands:
    def test_simulate_reproducible_csv(self, tmp_path):
        path = write_config(tmp_path)
        for name in ("a", "b"):
            rc = main(["simulate", "--config", str(path), "--out", str(tmp_path / name)])
            assert rc == 0
        fa, fb = tmp_path / "a" / "snapshots.csv", tmp_path / "b" / "snapshots.csv"
        assert filecmp.cmp(fa, fb, shallow=False)  # byte-identical
        head = fa.read_text().splitlines()
        assert head[0] == "# schema=snapshots/v1"
        assert head[1] == "replicate_id,time,config"
        assert (tmp_path / "a" / "snapshots.manifest").exists()
        manifest = (tmp_path / "a" / "snapshots.manifest").read_text()
        assert "config_sha256" in manifest and "master_seed = 12345" in manifest

    def test_profile_integrator_flag(self, tmp_path):
        path = write_config(tmp_path)
        for integ in ("imex", "rk4"):
            rc = main(["profile", "--config", str(path), "--integrator", integ, "--out", str(tmp_path / integ)])
            assert rc == 0
        a = (tmp_path / "imex" / "profile.csv").read_text().splitlines()
        b = (tmp_path / "rk4" / "profile.csv").read_text().splitlines()
        assert a[0] == "# schema=profile/v1"
        # same grid, values agree to solver tolerance
        for la, lb in zip(a[2:], b[2:]):
            ta, xa, va = la.split(",")
            tb, xb, vb = lb.split(",")
            assert (ta, xa) == (tb, xb)
            assert abs(float(va) - float(vb)) < 1e-5

    def test_hydro_both_solvers(self, tmp_path):
        cfg = BASE_CONFIG + "study.t_grid = 0.3\n"
        path = write_config(tmp_path, cfg)
        assert main(["hydro", "--config", str(path), "--out", str(tmp_path / "h")]) == 0
        assert main(["hydro", "--config", str(path), "--solver", "integral", "--out", str(tmp_path / "h")]) == 0
        assert (tmp_path / "h" / "macro_robin.csv").exists()
        assert (tmp_path / "h" / "macro_integral.csv").exists()

    def test_vstudy_outputs(self, tmp_path):
        cfg = BASE_CONFIG.replace("model.N = 3", "model.N_list = 3,4")
        cfg += "study.kind = vstudy\nstudy.pattern = N-1,N\nstudy.t = 0.2\nstudy.m_pilot = 2000\nstudy.m_override = 4000\n"
        path = write_config(tmp_path, cfg)
        main(["vstudy", "--config", str(path), "--out", str(tmp_path / "v")])
        lines = (tmp_path / "v" / "vstudy.csv").read_text().splitlines()
        assert lines[0] == "# schema=scaling/v1"
        assert lines[1] == "N,epsilon,value,stderr,samples,starved"
        assert len(lines) == 4
        assert (tmp_path / "v" / "vstudy_summary.csv").exists()

    def test_oracle_golden_csv(self, tmp_path):
        cfg = BASE_CONFIG.replace("model.N = 3", "model.N = 2")
        cfg += "study.sites = 1,2\nstudy.times = 0.3\n"
        path = write_config(tmp_path, cfg)
        assert main(["oracle", "--config", str(path), "--out", str(tmp_path / "g")]) == 0
        lines = (tmp_path / "g" / "golden.csv").read_text().splitlines()
        assert lines[1] == "n_sites,K,j,t,sites,centering_mode,value"
        n_sites, k, j, t, sites, mode, value = lines[2].split(",")
        assert sites == "1;2" and mode == "rho_eps"
        assert abs(float(value) - 0.0214009541284588) < 1e-6

    def test_kernels_outputs(self, tmp_path):
        cfg = BASE_CONFIG.replace("model.N = 3", "model.N_list = 4")
        cfg += "study.times = 0.1,0.5\n"
        path = write_config(tmp_path, cfg)
        assert main(["kernels", "--config", str(path), "--out", str(tmp_path / "k")]) == 0
        assert (tmp_path / "k" / "kernels.csv").read_text().splitlines()[0] == "# schema=kernel/v1"
        assert (tmp_path / "k" / "kernel_bounds.csv").exists()

    def test_gradstudy_runs(self, tmp_path):
        cfg = BASE_CONFIG.replace("model.N = 3", "model.N_list = 4,6").replace("run.M = 64", "run.M = 3000")
        cfg += "study.pattern = N-2,N-1\nstudy.t = 0.2\n"
        path = write_config(tmp_path, cfg)
        assert main(["gradstudy", "--config", str(path), "--out", str(tmp_path / "gr")]) == 0

    def test_stdecay_runs(self, tmp_path):
        cfg = BASE_CONFIG.replace("run.M = 64", "run.M = 3000").replace("run.t_end = 0.2", "run.t_end = 0.5")
        cfg += "study.y_pattern = N\nstudy.x_pattern = N\nstudy.s = 0.1\nstudy.gaps = 0.1,0.3\n"
        path = write_config(tmp_path, cfg)
        assert main(["stdecay", "--config", str(path), "--out", str(tmp_path / "sd")]) == 0
        lines = (tmp_path / "sd" / "stdecay.csv").read_text().splitlines()
        assert lines[1] == "gap,value,stderr,samples"

    def test_field_report(self, tmp_path):
        cfg = BASE_CONFIG.replace("model.N = 3", "model.N = 8").replace("run.M = 64", "run.M = 2000")
        cfg += "study.test_functions = cos2plus\n"
        path = write_config(tmp_path, cfg)
        assert main(["field", "--config", str(path), "--out", str(tmp_path / "f")]) == 0
        lines = (tmp_path / "f" / "field.csv").read_text().splitlines()
        assert lines[1] == "H_id,t,G_id,s,empirical,stderr,oracle,zscore"

    def test_accept_driver_contract(self, tmp_path, capsys):
        rc = main(["accept", "--suite", "primary", "--only", "2,4", "--out", str(tmp_path / "acc")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "[PASS]  2." in out and "[PASS]  4." in out
        assert (tmp_path / "acc" / "acceptance.csv").exists()

    def test_env_var_thread_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("STIRRINGLAB_THREADS", "1")
        path = write_config(tmp_path)
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "envthreads")]) == 0
