"""Simulation harness: reproducibility, config handling, CSV, CLI exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from eigengp.errors import ConfigError
from eigengp.experiments import (
    ExperimentConfig,
    build_kernel,
    config_from_dict,
    fit_replication,
    inducing_count_rule,
    kl_table,
    posterior_curves,
    resolve,
    run_experiment,
    simulate,
    write_csv,
)


def tiny_matern(**overrides):
    base = dict(experiment="matern", n=60, m=10, replications=2, grid_size=25, seed=5)
    base.update(overrides)
    return resolve(ExperimentConfig(**base))


class TestSimulate:
    def test_same_seed_bitwise_identical(self):
        config = tiny_matern()
        a = simulate(config, replication=3)
        b = simulate(config, replication=3)
        np.testing.assert_array_equal(a.xs, b.xs)
        np.testing.assert_array_equal(a.ys, b.ys)

    def test_replications_differ(self):
        config = tiny_matern()
        a = simulate(config, replication=0)
        b = simulate(config, replication=1)
        assert not np.array_equal(a.xs, b.xs)

    def test_noiseless_zero_truth(self):
        config = tiny_matern(sigma=0.0, truth="zero")
        data = simulate(config)
        np.testing.assert_array_equal(data.ys, 0.0)

    def test_uniform_design_mean(self):
        config = tiny_matern(n=100_000)
        data = simulate(config)
        assert abs(data.xs.mean() - 0.5) <= 0.005

    def test_gaussian_design_for_sqexp(self):
        config = resolve(ExperimentConfig(experiment="sqexp", n=50_000))
        data = simulate(config)
        assert abs(data.xs.mean()) <= 0.02
        assert abs(data.xs.std() - 1.0) <= 0.02


class TestConfig:
    def test_defaults_matern(self):
        config = resolve(ExperimentConfig(experiment="matern"))
        assert (config.n, config.m) == (3000, 40)
        assert config.alpha == 0.6
        assert config.sigma == 0.2
        assert config.method == "matrix"

    def test_defaults_sqexp_length_scale_rule(self):
        """b = 4 n^(-1/(1+2 alpha)) at the defaults n = 5000, alpha = 0.8."""
        config = resolve(ExperimentConfig(experiment="sqexp"))
        assert config.method == "operator"
        expected = 4.0 * 5000 ** (-1.0 / 2.6)
        assert config.length_scale == pytest.approx(expected, rel=1e-12)
        spec = build_kernel(config)
        assert spec.length_scale == pytest.approx(expected, rel=1e-12)

    def test_inducing_count_rule(self):
        assert [inducing_count_rule(n, 0.6) for n in (100, 300, 1000, 3000)] == [
            8, 13, 23, 38,
        ]

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"experiment": "matern", "bogus": 1})

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"experiment": "nope"})
        with pytest.raises(ConfigError):
            config_from_dict({"experiment": "matern", "replications": 0})
        with pytest.raises(ConfigError):
            config_from_dict({"experiment": "matern", "sigma": -0.1})
        with pytest.raises(ConfigError):
            config_from_dict({"experiment": "matern", "ns": ["a"]})
        with pytest.raises(ConfigError):
            config_from_dict({"experiment": "matern", "n": 50, "m": 60})

    def test_reps_by_n_keys_coerced(self):
        config = config_from_dict(
            {"experiment": "matern", "reps_by_n": {"3000": 20}}
        )
        assert config.reps_by_n == {3000: 20}


class TestFitReplication:
    def test_full_rank_kl_vanishes(self):
        config = tiny_matern(m=60, replications=1)
        record = fit_replication(config, 0)
        assert record.kl <= 1e-6

    def test_record_fields_finite(self):
        record = fit_replication(tiny_matern(), 0)
        for name in ("kl", "l2_error", "hellinger_error", "coverage", "mean_width"):
            assert np.isfinite(getattr(record, name))
        assert record.kl >= 0.0
        assert 0.0 <= record.coverage <= 1.0

    def test_run_experiment_thread_count_invariance(self):
        r1 = run_experiment(tiny_matern(replications=4, threads=1))
        r8 = run_experiment(tiny_matern(replications=4, threads=8))
        for a, b in zip(r1.records, r8.records):
            assert a.kl == b.kl
            assert a.l2_error == b.l2_error
            assert a.mean_width == b.mean_width


class TestCurves:
    def test_two_point_grid(self, tmp_path):
        config = tiny_matern(grid_size=2, out_dir=str(tmp_path))
        rows = posterior_curves(config)
        assert rows.shape == (2, 8)
        assert np.all(np.isfinite(rows))
        header = (tmp_path / "curves.csv").read_text().splitlines()[0]
        assert header == "x,f0,exact_mean,exact_lo,exact_hi,var_mean,var_lo,var_hi"

    def test_full_rank_curves_match_exact(self):
        config = tiny_matern(m=60, grid_size=40)
        rows = posterior_curves(config)
        assert np.abs(rows[:, 5] - rows[:, 2]).max() <= 1e-5


class TestKlTable:
    def test_small_table_shapes(self):
        config = tiny_matern(ns=(40, 80, 160), replications=3)
        rows, rate = kl_table(config)
        assert [r["n"] for r in rows] == [40, 80, 160]
        assert all(r["kl_mean"] >= 0 for r in rows)
        assert np.isfinite(rate.slope)


class TestCsv:
    def test_full_precision_round_trip(self, tmp_path):
        values = [np.pi, 1.0 / 3.0, 6.02214076e23, 1e-300]
        path = write_csv(tmp_path / "x.csv", ("v",), [[v] for v in values])
        lines = path.read_text().splitlines()[1:]
        for line, v in zip(lines, values):
            assert float(line) == v


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "eigengp.cli", *args],
        capture_output=True,
        text=True,
    )


class TestCli:
    def test_missing_config_file_exits_2(self):
        proc = run_cli("fit", "--config", "/nonexistent/config.json")
        assert proc.returncode == 2

    def test_invalid_config_key_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "matern", "oops": True}))
        proc = run_cli("fit", "--config", str(bad))
        assert proc.returncode == 2
        assert "config error" in proc.stderr

    def test_simulate_writes_dataset(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"experiment": "matern", "n": 30}))
        proc = run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        lines = (tmp_path / "dataset.csv").read_text().splitlines()
        assert lines[0] == "x1,y"
        assert len(lines) == 31

    def test_fit_and_determinism_across_threads(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(
            json.dumps(
                {"experiment": "matern", "n": 50, "m": 8, "replications": 3,
                 "grid_size": 20, "seed": 11}
            )
        )
        out1 = tmp_path / "t1"
        out8 = tmp_path / "t8"
        p1 = run_cli("fit", "--config", str(cfg), "--out", str(out1), "--threads", "1")
        p8 = run_cli("fit", "--config", str(cfg), "--out", str(out8), "--threads", "8")
        assert p1.returncode == 0, p1.stderr
        assert p8.returncode == 0, p8.stderr
        for name in ("fit_replications.csv", "fit_summary.csv"):
            assert (out1 / name).read_bytes() == (out8 / name).read_bytes()

    def test_curves_command(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(
            json.dumps({"experiment": "matern", "n": 40, "m": 6, "grid_size": 12})
        )
        proc = run_cli("curves", "--config", str(cfg), "--out", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "curves.csv").exists()

    def test_bounds_check_csv_columns(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(
            json.dumps(
                {"experiment": "series", "series_truncation": 300,
                 "ns": [20, 30], "ms": [2, 4], "replications": 10}
            )
        )
        proc = run_cli("bounds-check", "--config", str(cfg), "--out", str(tmp_path))
        assert proc.returncode == 0, proc.stderr
        lines = (tmp_path / "bounds_check.csv").read_text().splitlines()
        assert lines[0] == "quantity,n,m,mc_mean,mc_stderr,bound,reps,seed"
        assert len(lines) == 1 + 2 * 2 * 2
