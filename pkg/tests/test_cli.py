"""CLI: dimensioning audit, presets, CSV determinism, error handling."""
import os

import pytest
from click.testing import CliRunner

from beaconsim.cli import main

TINY = [
    "--set", "deployment.n_users=12",
    "--set", "run.duration_s=4.0",
    "--set", "run.warmup_s=1.0",
    "--set", "run.replications=2",
]


@pytest.fixture
def runner():
    return CliRunner()


class TestDimension:
    def test_table_values_printed(self, runner):
        res = runner.invoke(main, ["dimension"])
        assert res.exit_code == 0
        assert "636" in res.output
        assert "1164" in res.output
        assert "4.74" in res.output
        assert "12" in res.output

    def test_override_changes_m_sys(self, runner):
        res = runner.invoke(main, ["dimension", "--set", "dimensioning.n_roots=1",
                                   "--set", "dimensioning.n_shifts=1"])
        assert res.exit_code == 0
        assert "53" in res.output

    def test_invalid_dimensioning_fails(self, runner):
        res = runner.invoke(main, ["dimension", "--set", "dimensioning.n_seq=9999"])
        assert res.exit_code != 0


class TestRun:
    def test_custom_writes_metrics_csv(self, runner, tmp_path):
        out = str(tmp_path / "o")
        res = runner.invoke(main, ["run", "custom", "--out", out, "--seed", "3",
                                   *TINY])
        assert res.exit_code == 0, res.output
        path = os.path.join(out, "metrics.csv")
        with open(path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == ("isd_m,n_users,scheme,reuse,mean_rate_hz,"
                            "rate_ci95,p_md,p_md_ci95")
        assert len(lines) == 2

    def test_same_seed_byte_identical(self, runner, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = str(tmp_path / sub)
            res = runner.invoke(main, ["run", "custom", "--out", out,
                                       "--seed", "7", *TINY])
            assert res.exit_code == 0, res.output
            with open(os.path.join(out, "metrics.csv"), "rb") as fh:
                outs.append(fh.read())
        assert outs[0] == outs[1]

    def test_fig6_first_row_zero(self, runner, tmp_path):
        out = str(tmp_path / "f6")
        res = runner.invoke(main, ["run", "fig6", "--out", out, "--seed", "5",
                                   "--set", "run.replications=2"])
        assert res.exit_code == 0, res.output
        with open(os.path.join(out, "wrong_cell.csv")) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "group_radius_m,p_wrong_cell,mean_delta_pl_db,ci95"
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == 0.0
        assert float(first[2]) == 0.0

    def test_groups_flag_sets_grouped_mode(self, runner, tmp_path):
        out = str(tmp_path / "g")
        res = runner.invoke(main, ["run", "custom", "--out", out, "--groups", "4",
                                   "--set", "run.duration_s=4.0",
                                   "--set", "run.warmup_s=1.0",
                                   "--set", "run.replications=1"])
        assert res.exit_code == 0, res.output
        with open(os.path.join(out, "metrics.csv")) as fh:
            row = fh.read().splitlines()[1].split(",")
        assert row[1] == "12" and row[2] == "grouped"

    def test_print_config_echoes_resolved_scenario(self, runner):
        res = runner.invoke(main, ["run", "custom", "--print-config",
                                   "--isd", "18", "--seed", "11"])
        assert res.exit_code == 0
        assert "isd_m: 18.0" in res.output
        assert "seed: 11" in res.output

    def test_env_seed_fallback(self, runner):
        res = runner.invoke(main, ["run", "custom", "--print-config"],
                            env={"BEACONSIM_SEED": "42"})
        assert res.exit_code == 0
        assert "seed: 42" in res.output

    def test_invalid_override_key_fails(self, runner):
        res = runner.invoke(main, ["run", "custom", "--set", "nope.key=1"])
        assert res.exit_code != 0
        assert "unknown" in res.output.lower()

    def test_unwritable_out_fails(self, runner, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        res = runner.invoke(main, ["run", "custom",
                                   "--out", str(blocker / "sub"), *TINY])
        assert res.exit_code != 0

    def test_config_file_loaded(self, runner, tmp_path):
        cfg_path = tmp_path / "sc.yaml"
        cfg_path.write_text("deployment:\n  isd_m: 18.0\n")
        res = runner.invoke(main, ["run", "custom", "--config", str(cfg_path),
                                   "--print-config"])
        assert res.exit_code == 0
        assert "isd_m: 18.0" in res.output

    def test_config_file_unknown_key_fails(self, runner, tmp_path):
        cfg_path = tmp_path / "sc.yaml"
        cfg_path.write_text("deployment:\n  speed: 1\n")
        res = runner.invoke(main, ["run", "custom", "--config", str(cfg_path)])
        assert res.exit_code != 0
