import dataclasses
import json

import numpy as np
import pytest

import mrplab as m
from mrplab.errors import ConfigError, DegenerateAdvantageError
from mrplab.harness import _z_for, rows_to_csv

from oracles import normal_cdf_series

EXPECTED_SWEEP_HEADER = (
    "sweep_var,mse_td_s,mse_td_s_lo,mse_td_s_hi,mse_td_sp,mse_td_sp_lo,mse_td_sp_hi,"
    "mse_td_adv,mse_td_adv_lo,mse_td_adv_hi,mse_mc_s,mse_mc_s_lo,mse_mc_s_hi,"
    "mse_mc_sp,mse_mc_sp_lo,mse_mc_sp_hi,mse_mc_adv,mse_mc_adv_lo,mse_mc_adv_hi,"
    "theo_td_s,theo_td_sp,theo_td_adv,theo_mc_s,theo_mc_sp,theo_mc_adv,redraws")

EXPECTED_RATIO_HEADER = (
    "sweep_var,ratio_s,ratio_s_lo,ratio_s_hi,ratio_sp,ratio_sp_lo,ratio_sp_hi,"
    "ratio_adv,ratio_adv_lo,ratio_adv_hi,theo_ratio_s,theo_ratio_sp,theo_ratio_adv,redraws")


class TestNormalCdf:
    def test_against_series_oracle_on_grid(self):
        xs = np.arange(-8.0, 8.0 + 1e-9, 1e-3)
        got = m.normal_cdf(xs)
        ref = np.array([normal_cdf_series(float(x)) for x in xs])
        assert float(np.max(np.abs(got - ref))) < 1e-7

    def test_symmetry_and_midpoint(self):
        assert m.normal_cdf(0.0) == pytest.approx(0.5, abs=1e-9)
        assert m.normal_cdf(1.5) + m.normal_cdf(-1.5) == pytest.approx(1.0, abs=1e-9)

    def test_z_for_95(self):
        assert _z_for(0.95) == 1.959964
        assert _z_for(0.99) == pytest.approx(2.5758293, abs=1e-4)


class TestMseWithCi:
    def test_all_zero(self):
        assert m.mse_with_ci([0.0, 0.0, 0.0]) == (0.0, 0.0, 0.0)

    def test_constant_errors(self):
        mse, lo, hi = m.mse_with_ci([3.0, 3.0, 3.0])
        assert mse == lo == hi == pytest.approx(9.0)

    def test_stated_formula(self):
        mse, lo, hi = m.mse_with_ci([0.0, 2.0])
        assert mse == pytest.approx(2.0)
        # sd of {0, 4} is sqrt(8); half-width z * sqrt(8) / sqrt(2)
        assert lo == pytest.approx(2.0 - 1.959964 * 2.0)
        assert hi == pytest.approx(2.0 + 1.959964 * 2.0)

    def test_too_few(self):
        with pytest.raises(ValueError):
            m.mse_with_ci([1.0])

    def test_ratio_ci_exact_when_identical(self):
        r, lo, hi = m.ratio_with_ci([1.0, 2.0, 0.5], [1.0, 2.0, 0.5])
        assert r == pytest.approx(1.0)
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ConfigError):
            m.ExperimentConfig(kind="horizon-sweep", t_list=(), reps=10)
        with pytest.raises(ConfigError):
            m.ExperimentConfig(kind="horizon-sweep", t_list=(10, 5), reps=10)
        with pytest.raises(ConfigError):
            m.ExperimentConfig(kind="horizon-sweep", t_list=(5,), reps=1)
        with pytest.raises(ConfigError):
            m.ExperimentConfig(kind="nope", t_list=(5,))

    def test_json_round_trip(self):
        cfg = m.ExperimentConfig(kind="meeting-sweep", h_list=(2, 3), horizon=6,
                                 branches=3, n=40, reps=4, base_seed=9,
                                 reward=m.gaussian(0.0, 1.0), targets=("h1", "h2"))
        doc = json.loads(json.dumps(cfg.to_json_dict()))
        assert m.ExperimentConfig.from_json_dict(doc) == cfg

    def test_unknown_fields_rejected(self):
        with pytest.raises(ConfigError):
            m.ExperimentConfig.from_json_dict({"kind": "regret", "n_list": [10], "reps": 4,
                                               "bogus": 1})


class TestHorizonSweep:
    def test_shape_and_header(self):
        cfg = m.ExperimentConfig(kind="horizon-sweep", width=3, t_list=(4, 6),
                                 n=50, reps=4, base_seed=2)
        rows = m.run_horizon_sweep(cfg)
        assert len(rows) == 2
        assert [f.name for f in dataclasses.fields(rows[0])] == EXPECTED_SWEEP_HEADER.split(",")
        csv = rows_to_csv(rows)
        assert csv.splitlines()[0] == EXPECTED_SWEEP_HEADER

    def test_ci_brackets_mse_and_theory_ordering(self):
        cfg = m.ExperimentConfig(kind="horizon-sweep", width=3, t_list=(4, 8, 12),
                                 n=80, reps=16, base_seed=3)
        for row in m.run_horizon_sweep(cfg):
            assert row.mse_td_s_lo <= row.mse_td_s <= row.mse_td_s_hi
            assert row.theo_td_s <= row.theo_mc_s + 1e-15
            assert row.theo_td_sp <= row.theo_mc_sp + 1e-15
            assert row.theo_td_adv <= row.theo_mc_adv + 1e-15

    def test_mc_advantage_grows_td_stays(self):
        cfg = m.ExperimentConfig(kind="horizon-sweep", width=5, t_list=(10, 40),
                                 n=50, reps=2, base_seed=0)
        rows = m.run_horizon_sweep(cfg)
        assert rows[1].theo_mc_adv > 2.0 * rows[0].theo_mc_adv
        assert rows[1].theo_td_adv < 2.0 * rows[0].theo_td_adv


class TestMeetingSweep:
    def test_endpoints(self):
        cfg = m.ExperimentConfig(kind="meeting-sweep", branches=3, horizon=6,
                                 h_list=(2, 6), n=60, reps=10, base_seed=4)
        rows = m.run_meeting_sweep(cfg)
        assert [f.name for f in dataclasses.fields(rows[0])] == EXPECTED_RATIO_HEADER.split(",")
        # merged immediately: head term weight 1, each of the T-2 shared states
        # contributes 1/k, all one-step variances equal
        k, t_hor = 3, 6
        expected = (1.0 + (t_hor - 2) / k) / (t_hor - 1)
        assert rows[0].theo_ratio_s == pytest.approx(expected, abs=1e-9)
        # never merged: TD == MC
        assert rows[1].ratio_s == pytest.approx(1.0, abs=1e-9)
        assert rows[1].ratio_adv == pytest.approx(1.0, abs=1e-9)
        assert rows[1].theo_ratio_s == pytest.approx(1.0, abs=1e-9)
        assert rows[1].theo_ratio_adv == pytest.approx(1.0, abs=1e-9)

    def test_row_count(self):
        cfg = m.ExperimentConfig(kind="meeting-sweep", branches=2, horizon=5,
                                 h_list=(2, 3, 4, 5), n=30, reps=4, base_seed=1)
        assert len(m.run_meeting_sweep(cfg)) == 4


class TestSampleSweep:
    def test_rows_and_scaling(self):
        cfg = m.ExperimentConfig(kind="sample-sweep", width=3, horizon=8,
                                 back_prob=0.1, n_list=(50, 200), reps=6, base_seed=6)
        rows = m.run_sample_sweep(cfg)
        assert len(rows) == 2
        # theoretical columns scale exactly like 1/n
        assert rows[0].theo_td_s == pytest.approx(rows[1].theo_td_s * 4.0)
        assert rows[0].theo_mc_adv == pytest.approx(rows[1].theo_mc_adv * 4.0)


class TestRegret:
    def test_columns_and_monotone_theory(self):
        cfg = m.ExperimentConfig(kind="regret", width=3, horizon=8, back_prob=0.1,
                                 n_list=(20, 80, 320), reps=40, base_seed=7)
        rows = m.run_regret(cfg)
        assert [f.name for f in dataclasses.fields(rows[0])] == \
            ["sweep_var", "regret_td", "regret_mc", "theo_regret_td",
             "theo_regret_mc", "redraws"]
        theo_td = [r.theo_regret_td for r in rows]
        assert theo_td == sorted(theo_td, reverse=True)
        for r in rows:
            assert r.theo_regret_td <= r.theo_regret_mc + 1e-12
            assert 0.0 <= r.regret_td <= 1.0

    def test_degenerate_advantage(self):
        cfg = m.ExperimentConfig(kind="regret", n_list=(10,), reps=4, base_seed=0,
                                 horizon=3, width=2, targets=("h1", "h1"))
        spec_cfg = dataclasses.replace(cfg, targets=("s1_1", "s1_1"))
        with pytest.raises(DegenerateAdvantageError):
            m.run_regret(spec_cfg)


class TestDeterminismAndOutput:
    def test_rep_chunk_matches_public_estimators(self):
        """The harness fast path must reproduce sample_dataset + the public
        estimators bit for bit."""
        from mrplab.harness import _rep_chunk
        from mrplab.rng import mix64
        spec = m.gen_layered(3, 6, 0.2, seed=40)
        report = m.analyze(spec)
        s, sp = "s1_1", "s1_2"
        v_s, v_sp = report.value(s), report.value(sp)
        errs, redraws = _rep_chunk((spec, 30, s, sp, v_s, v_sp, 99, 0, range(5)))
        for rep in range(5):
            attempt = 0
            while True:
                ds = m.sample_dataset(spec, 30, seed=mix64(99, 0, rep, attempt))
                td, mc = m.td_estimate(ds, spec), m.mc_estimate(ds, spec)
                i, j = td.idx(s), td.idx(sp)
                if td.defined[i] and td.defined[j] and mc.defined[i] and mc.defined[j]:
                    break
                attempt += 1
            assert redraws[rep] == attempt
            expected = (td.values[i] - v_s, td.values[j] - v_sp,
                        (td.values[i] - td.values[j]) - (v_s - v_sp),
                        mc.values[i] - v_s, mc.values[j] - v_sp,
                        (mc.values[i] - mc.values[j]) - (v_s - v_sp))
            assert tuple(errs[rep]) == expected

    def test_byte_identical_across_thread_counts(self, monkeypatch, tmp_path):
        cfg = m.ExperimentConfig(kind="horizon-sweep", width=3, t_list=(4,),
                                 n=40, reps=12, base_seed=5)
        monkeypatch.setenv("MRPLAB_THREADS", "1")
        rows_serial = m.run_horizon_sweep(cfg)
        monkeypatch.setenv("MRPLAB_THREADS", "2")
        rows_pool = m.run_horizon_sweep(cfg)
        assert rows_to_csv(rows_serial) == rows_to_csv(rows_pool)

    def test_redraws_recorded_and_high_rate_flagged(self):
        # a rarely-clicked page forces undefined estimates and redraws
        cfg = m.ExperimentConfig(kind="sample-sweep", n_list=(4,), reps=30,
                                 base_seed=11, targets=("page1", "page2"))
        spec = m.gen_checkout(6, [0.9, 0.9, 0.9, 0.9, 0.9, 0.9], 0.5)
        report = m.analyze(spec)
        from mrplab.harness import _run_reps
        with pytest.warns(RuntimeWarning, match="redraws"):
            errs, redraws = _run_reps(spec, cfg, 0, 4, "page1", "page2",
                                      report.value("page1"), report.value("page2"))
        assert errs.shape == (30, 6)
        assert redraws > 0.05 * 30  # with n=4 over 6 pages, misses are frequent

    def test_write_outputs_with_sidecar(self, tmp_path):
        cfg = m.ExperimentConfig(kind="horizon-sweep", width=2, t_list=(3,),
                                 n=20, reps=4, base_seed=8)
        rows = m.run_horizon_sweep(cfg)
        out = tmp_path / "sweep.csv"
        m.write_outputs(cfg, rows, out)
        text = out.read_text()
        assert text.splitlines()[0] == EXPECTED_SWEEP_HEADER
        sidecar = json.loads((tmp_path / "sweep.config.json").read_text())
        assert sidecar["config"]["kind"] == "horizon-sweep"
        assert "redraw_policy" in sidecar and "ci" in sidecar

    def test_csv_floats_17_digits(self):
        row = m.SweepRow(*([1.0 / 3.0] * 25 + [0]))
        line = rows_to_csv([row]).splitlines()[1]
        assert "0.33333333333333331" in line
