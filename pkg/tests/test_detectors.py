"""Change detectors: update rules, cut bound, alarm timing, false-alarm control."""

from __future__ import annotations

import math

import numpy as np
import pytest

from driftlab._core import kernels
from driftlab.detectors import ADWIN, DDM, DetectorError, PageHinkley, Verdict, make_detector


class TestDDM:
    def test_s_formula_spot_value(self):
        # p = 0.2 at n = 100 -> s = sqrt(0.16/100) = 0.04
        ddm = DDM(warmup=1000)  # no verdicts interfere
        bits = [1] * 20 + [0] * 80
        for b in bits:
            ddm.update(b)
        assert ddm.n == 100
        assert ddm.error_rate == pytest.approx(0.2, abs=1e-12)
        assert ddm.statistic == pytest.approx(0.2 + 0.04, abs=1e-12)

    def test_warmup_yields_none(self):
        ddm = DDM(warmup=30)
        for _ in range(29):
            assert ddm.update(1) is Verdict.NONE

    def test_zero_error_stream_never_alarms(self):
        ddm = DDM(warmup=30)
        for _ in range(5000):
            assert ddm.update(0) is Verdict.NONE

    def test_drift_after_error_rate_jump(self):
        # oracle: Monte-Carlo simulation, Bernoulli(0.1) then Bernoulli(0.5)
        detections_ok = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            ddm = DDM()
            fired_before = False
            fired_at = None
            for t in range(1000):
                if ddm.update(int(rng.random() < 0.1)) is Verdict.DRIFT:
                    fired_before = True
            for t in range(1000, 1600):
                if ddm.update(int(rng.random() < 0.5)) is Verdict.DRIFT:
                    fired_at = t
                    break
            if not fired_before and fired_at is not None and fired_at <= 1300:
                detections_ok += 1
        assert detections_ok >= 9

    def test_warning_before_drift_on_gradual_rise(self):
        ddm = DDM(warmup=30)
        verdicts = []
        rng = np.random.default_rng(12)
        for t in range(2000):
            p = 0.1 if t < 1000 else 0.1 + (t - 1000) * 0.0008
            verdicts.append(ddm.update(int(rng.random() < p)))
        if Verdict.DRIFT in verdicts:
            assert Verdict.WARNING in verdicts[: verdicts.index(Verdict.DRIFT)]

    def test_rejects_non_binary(self):
        with pytest.raises(DetectorError):
            DDM().update(0.5)

    def test_reset_reproduces_fresh_trace(self):
        a = DDM(warmup=5)
        for b in (0, 1, 0, 1, 1, 0):
            a.update(b)
        a.reset()
        fresh = DDM(warmup=5)
        trace_a = [a.update(b) for b in (0, 1, 0, 0, 1)]
        trace_f = [fresh.update(b) for b in (0, 1, 0, 0, 1)]
        assert trace_a == trace_f
        assert a.warmup == 5

    def test_double_reset_idempotent(self):
        a = DDM()
        a.update(1)
        a.reset()
        state_once = a._state.copy()
        a.reset()
        assert np.array_equal(a._state, state_once)


class TestADWIN:
    def test_constant_stream_no_cuts(self):
        adwin = ADWIN(delta=0.002)
        for _ in range(5000):
            assert adwin.update(0.5) is Verdict.NONE
        assert adwin.window_len == 5000

    def test_cut_bound_spot_value(self):
        # |W0|=|W1|=100, delta'=1e-5 -> m=100, eps = sqrt(ln(4e5)/200) ~ 0.254
        eps = math.sqrt(math.log(4.0 / 1e-5) / 200.0)
        assert eps == pytest.approx(0.254, abs=5e-4)
        counts = np.full(2, 100.0)
        delta = 0.002  # n=200 -> delta' = 1e-5
        just_below = np.array([0.0, 100.0 * (eps - 1e-4)])
        just_above = np.array([0.0, 100.0 * (eps + 1e-4)])
        assert kernels.adwin_should_drop(counts, just_below, 2, delta) == 0
        assert kernels.adwin_should_drop(counts, just_above, 2, delta) == 1

    def test_mean_step_drift_within_150(self):
        # deterministic trace oracle: constant 0.2 then constant 0.8
        adwin = ADWIN(delta=0.002)
        for _ in range(1000):
            assert adwin.update(0.2) is Verdict.NONE
        pre_len = adwin.window_len
        fired_at = None
        for k in range(1, 400):
            if adwin.update(0.8) is Verdict.DRIFT:
                fired_at = k
                break
        assert fired_at is not None and fired_at <= 150
        assert adwin.window_len < pre_len

    def test_window_mean_matches_retained_sum(self):
        adwin = ADWIN(delta=0.002)
        rng = np.random.default_rng(3)
        for _ in range(500):
            adwin.update(float(rng.random()))
        counts, sums, k = adwin._flatten()
        assert counts[:k].sum() == adwin.window_len
        assert sums[:k].sum() == pytest.approx(adwin.total, rel=1e-12)
        assert adwin.mean == pytest.approx(adwin.total / adwin.window_len)

    def test_tiny_delta_prevents_all_cuts(self):
        adwin = ADWIN(delta=1e-280)
        rng = np.random.default_rng(1)
        verdicts = set()
        for t in range(300):
            v = 0.0 if t < 150 else 1.0
            verdicts.add(adwin.update(v + 0.0 * rng.random()))
        assert verdicts == {Verdict.NONE}
        assert adwin.window_len == 300

    def test_bucket_rows_respect_capacity(self):
        adwin = ADWIN(delta=0.002, max_buckets=5)
        for _ in range(1000):
            adwin.update(0.5)
        assert all(len(row) <= 5 for row in adwin._rows)

    def test_rejects_non_finite(self):
        with pytest.raises(DetectorError):
            ADWIN().update(float("nan"))

    def test_reset(self):
        adwin = ADWIN(delta=0.01)
        for _ in range(100):
            adwin.update(0.9)
        adwin.reset()
        assert adwin.window_len == 0
        assert adwin.delta == 0.01


class TestPageHinkley:
    def test_constant_input_statistic_stays_zero(self):
        ph = PageHinkley(delta=0.005, lam=5.0)
        for _ in range(1000):
            assert ph.update(0.7) is Verdict.NONE
            assert ph.statistic == pytest.approx(0.0, abs=1e-12)

    def test_alarm_time_after_unit_shift(self):
        # deterministic trace: 0.0 for 200 steps, then 1.0; expected alarm
        # around lam/(delta_shift - delta) + adaptation slack
        ph = PageHinkley(delta=0.005, lam=5.0)
        for _ in range(200):
            ph.update(0.0)
        fired_at = None
        for k in range(1, 50):
            if ph.update(1.0) is Verdict.DRIFT:
                fired_at = k
                break
        expected = 5.0 / (1.0 - 0.005)
        assert fired_at is not None
        assert fired_at <= expected + 7

    def test_unreachable_lambda_never_alarms(self):
        ph = PageHinkley(delta=0.005, lam=1e308)
        rng = np.random.default_rng(0)
        for _ in range(5000):
            assert ph.update(float(rng.random())) is Verdict.NONE

    def test_reset_on_drift(self):
        ph = PageHinkley(delta=0.0, lam=0.5)
        for _ in range(50):
            ph.update(0.0)
        verdict = Verdict.NONE
        k = 0
        while verdict is not Verdict.DRIFT and k < 100:
            verdict = ph.update(1.0)
            k += 1
        assert verdict is Verdict.DRIFT
        assert ph.statistic == 0.0  # fresh after reset

    def test_rejects_non_finite(self):
        with pytest.raises(DetectorError):
            PageHinkley().update(float("inf"))


class TestSharedBehavior:
    def test_determinism_identical_traces(self):
        rng = np.random.default_rng(5)
        values = rng.random(2000)
        bits = (values < 0.3).astype(float)
        for kind, feed in (("ddm", bits), ("adwin", values), ("ph", values)):
            a = make_detector(kind)
            b = make_detector(kind)
            trace_a = [a.update(float(v)) for v in feed]
            trace_b = [b.update(float(v)) for v in feed]
            assert trace_a == trace_b, kind

    def test_false_alarm_control_on_stationary_stream(self):
        # regression bound: <= 20% of 50 seeds alarm on Bernoulli(0.2) x 10,000
        for kind in ("ddm", "adwin", "ph"):
            alarming = 0
            for seed in range(50):
                rng = np.random.default_rng(seed)
                det = make_detector(kind)
                bits = (rng.random(10000) < 0.2).astype(float)
                if any(det.update(float(b)) is Verdict.DRIFT for b in bits):
                    alarming += 1
            assert alarming <= 10, (kind, alarming)

    def test_unknown_kind(self):
        with pytest.raises(DetectorError, match="kswin"):
            make_detector("kswin")

    def test_verdict_trace_export(self, tmp_path):
        import csv

        from driftlab.detectors import export_verdict_trace, run_verdict_trace

        ph = PageHinkley(delta=0.005, lam=2.0)
        values = [0.1] * 200 + [0.9] * 100
        rows = run_verdict_trace(ph, values)
        assert len(rows) == 300
        assert any(r.verdict == int(Verdict.DRIFT) for r in rows)
        out = tmp_path / "trace.csv"
        export_verdict_trace(rows, out)
        with open(out) as fh:
            parsed = list(csv.DictReader(fh))
        assert len(parsed) == 300
        assert [r.step for r in rows] == [int(p["step"]) for p in parsed]
        assert all(float(p["statistic"]) >= 0.0 for p in parsed)
