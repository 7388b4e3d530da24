"""Command-line interface behavior and exit codes."""

import os

import pytest

from crystalflow.cli import OUTPUT_ROOT_ENV, main

CONFIG = """
[grid]
dim = 1
nodes = 65

[initial]
profile = cosine
amplitude = 0.1

[scheme]
tau = 0.01
horizon = 0.05

[output]
directory = demo
snapshot_stride = 1
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(CONFIG)
    return str(path)


class TestRunCommand:
    def test_clean_run_exit_zero(self, config_path, tmp_path, capsys):
        code = main(["--output-root", str(tmp_path), "run", config_path])
        assert code == 0
        out = capsys.readouterr().out
        assert "prop31" in out and "pass" in out
        assert (tmp_path / "demo" / "trajectory.csv").exists()

    def test_env_var_output_root(self, config_path, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "via_env"))
        assert main(["run", config_path]) == 0
        assert (tmp_path / "via_env" / "demo" / "trajectory.csv").exists()

    def test_config_errors_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[grid]\ndim = 9\nnodes = 65\n[initial]\nprofile = cosine\namplitude = 0.1\n")
        assert main(["run", str(bad)]) == 2
        assert "dim" in capsys.readouterr().err

    def test_overflow_run_exit_nonzero(self, tmp_path, capsys):
        cfg = tmp_path / "boom.cfg"
        cfg.write_text(
            CONFIG.replace("amplitude = 0.1", "amplitude = 3\nmode = 8")
        )
        code = main(["--output-root", str(tmp_path), "run", str(cfg)])
        assert code == 1
        assert "failed" in capsys.readouterr().err


class TestVerifyCommand:
    def test_verify_round_trip(self, config_path, tmp_path, capsys):
        main(["--output-root", str(tmp_path), "run", config_path])
        capsys.readouterr()
        code = main(["verify", str(tmp_path / "demo")])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("name,lhs,rhs,margin,pass")
        assert out.count("true") == 3

    def test_verify_requires_snapshots(self, config_path, tmp_path, capsys):
        no_snap = CONFIG.replace("snapshot_stride = 1", "snapshot_stride = 0")
        path = tmp_path / "nosnap.cfg"
        path.write_text(no_snap)
        main(["--output-root", str(tmp_path), "run", str(path)])
        code = main(["verify", str(tmp_path / "demo")])
        assert code == 1
        assert "snapshot" in capsys.readouterr().err


class TestSweepCommand:
    def test_sweep_outputs_summary(self, config_path, tmp_path, capsys):
        code = main(
            [
                "--output-root",
                str(tmp_path),
                "sweep",
                config_path,
                "--param",
                "tau",
                "--values",
                "0.01",
                "0.005",
            ]
        )
        assert code == 0
        assert (tmp_path / "sweep_summary.csv").exists()
        assert "tau = 0.01: ok" in capsys.readouterr().out


class TestCompareCommand:
    def test_compare_variants(self, config_path, tmp_path, capsys):
        code = main(
            ["--output-root", str(tmp_path), "compare", config_path, "--variants", "sinh,exp"]
        )
        assert code == 0
        assert (tmp_path / "variant_comparison.csv").exists()
        out = capsys.readouterr().out
        assert "sinh: ok" in out and "exp: ok" in out
