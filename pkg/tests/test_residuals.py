"""Residual processing, detection logic and the FSM/FIM constructions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcsibench import residuals as R


def series_from(values, dt=0.01):
    values = np.asarray(values, dtype=float)
    t = dt * np.arange(len(values))
    return R.ResidualSeries(t=t, values=values)


def single_channel(x, channel=0, dt=0.01):
    vals = np.zeros((len(x), 9))
    vals[:, channel] = x
    return series_from(vals, dt)


class TestCalibrate:
    def test_constant_series_is_degenerate(self):
        with pytest.raises(R.CalibrationError):
            R.calibrate(series_from(np.ones((100, 9))))

    def test_standard_normal_statistics(self):
        rng = np.random.default_rng(0)
        series = series_from(rng.standard_normal((10000, 9)))
        calib = R.calibrate(series)
        assert np.all(np.abs(calib.mu) < 0.05)
        assert np.all(np.abs(calib.sigma - 1.0) < 0.05)

    def test_self_normalization_idempotent(self):
        rng = np.random.default_rng(1)
        series = series_from(2.5 + 0.3 * rng.standard_normal((5000, 9)))
        calib = R.calibrate(series)
        norm = R.normalize(series, calib)
        assert np.all(np.abs(norm.values.mean(axis=0)) < 1e-12)
        assert np.all(np.abs(norm.values.std(axis=0) - 1.0) < 1e-12)

    @given(scale=st.floats(0.01, 100.0))
    @settings(max_examples=20)
    def test_affine_invariance(self, scale):
        rng = np.random.default_rng(2)
        raw = rng.standard_normal((2000, 9))
        a = R.normalize(series_from(raw), R.calibrate(series_from(raw)))
        b = R.normalize(series_from(raw * scale), R.calibrate(series_from(raw * scale)))
        assert np.allclose(a.values, b.values, atol=1e-10)

    def test_round_trip_csv(self, tmp_path):
        rng = np.random.default_rng(3)
        calib = R.calibrate(series_from(rng.standard_normal((500, 9))))
        path = tmp_path / "calib.csv"
        calib.save(path)
        back = R.ResidualCalibration.load(path)
        assert np.array_equal(back.mu, calib.mu)
        assert np.array_equal(back.sigma, calib.sigma)


class TestLowpass:
    def test_step_response_time_constant(self):
        dt, tau = 0.01, 0.5
        x = np.ones((1000, 1))
        x[0] = 0.0
        y = R.lowpass(x, dt, tau)
        k63 = int(round(tau / dt))
        assert 0.55 < y[k63, 0] < 0.70  # ~1-1/e after one time constant

    def test_zero_tau_is_identity(self):
        x = np.random.default_rng(4).standard_normal((100, 2))
        assert np.array_equal(R.lowpass(x, 0.01, 0.0), x)


class TestDetect:
    def test_short_excursion_ignored(self):
        x = np.zeros(1000)
        x[100:350] = 7.0  # 2.5 s above threshold at 100 Hz
        events = R.detect(single_channel(x), threshold=5.0, t_f=3.0)
        assert events == []

    def test_long_excursion_detected(self):
        x = np.zeros(1000)
        x[100:450] = -7.0  # 3.5 s, negative side counts via |r|
        events = R.detect(single_channel(x), threshold=5.0, t_f=3.0)
        assert len(events) == 1
        ev = events[0]
        assert ev.residual == "r_Tc"
        assert ev.duration == pytest.approx(3.5, abs=0.02)
        assert ev.peak == pytest.approx(7.0)

    def test_all_zero_series_empty(self):
        assert R.detect(single_channel(np.zeros(500))) == []

    @given(j1=st.floats(1.0, 10.0), j2=st.floats(1.0, 10.0))
    @settings(max_examples=20)
    def test_event_count_monotone_in_threshold(self, j1, j2):
        rng = np.random.default_rng(5)
        x = 6.0 * np.sin(np.linspace(0, 20, 4000)) + rng.standard_normal(4000)
        series = single_channel(x)
        lo, hi = min(j1, j2), max(j1, j2)
        assert len(R.detect(series, hi, 1.0)) <= len(R.detect(series, lo, 1.0))

    def test_event_overlap_bookkeeping(self):
        ev = R.DetectionEvent("r_pc", start=10.0, duration=5.0, peak=8.0)
        assert ev.overlaps([(12.0, 20.0)])
        assert not ev.overlaps([(15.0, 20.0)])
        assert not ev.overlaps([])


def fsm_from_columns(cols):
    vals = np.zeros((9, 11), dtype=bool)
    for fault, residuals in cols.items():
        j = R.FAULT_ORDER.index(fault)
        for rn in residuals:
            vals[R.RESIDUAL_NAMES.index(rn), j] = True
    return R.FSMMatrix(values=vals)


class TestFsmFim:
    def test_build_fsm_requires_all_runs(self):
        with pytest.raises(ValueError):
            R.build_fsm({"f_paf": []}, {"f_paf": []})

    def test_build_fsm_counts_overlapping_events_only(self):
        events = {f: [] for f in R.FAULT_ORDER}
        spans = {f: [(100.0, 200.0)] for f in R.FAULT_ORDER}
        events["f_Wc"] = [
            R.DetectionEvent("r_pc", 150.0, 10.0, 9.0),   # inside window
            R.DetectionEvent("r_Tc", 300.0, 10.0, 9.0),   # outside window
        ]
        fsm = R.build_fsm(events, spans)
        assert fsm.values[R.RESIDUAL_NAMES.index("r_pc"), R.FAULT_ORDER.index("f_Wc")]
        assert not fsm.values[R.RESIDUAL_NAMES.index("r_Tc"), R.FAULT_ORDER.index("f_Wc")]

    def test_identical_columns_mutually_inseparable(self):
        fsm = fsm_from_columns({
            "f_Waf": ["r_pc", "r_pim"],
            "f_Wic": ["r_pc", "r_pim"],
        })
        fim, undet = R.fim_from_fsm(fsm)
        i, j = R.FAULT_ORDER.index("f_Waf"), R.FAULT_ORDER.index("f_Wic")
        assert fim.values[i, j] and fim.values[j, i]

    def test_distinct_singletons_isolable(self):
        fsm = fsm_from_columns({"f_ypic": ["r_pic"], "f_ypim": ["r_pim"]})
        fim, _ = R.fim_from_fsm(fsm)
        i, j = R.FAULT_ORDER.index("f_ypic"), R.FAULT_ORDER.index("f_ypim")
        assert not fim.values[i, j] and not fim.values[j, i]

    def test_subset_signature_not_isolable(self):
        # f_xth's single r_Waf signature is explainable by any fault that
        # also trips r_Waf
        fsm = fsm_from_columns({"f_xth": ["r_Waf"], "f_Wc": ["r_Waf", "r_pc"]})
        fim, _ = R.fim_from_fsm(fsm)
        i, j = R.FAULT_ORDER.index("f_xth"), R.FAULT_ORDER.index("f_Wc")
        assert fim.values[i, j]
        assert not fim.values[j, i]

    def test_undetectable_fault_flagged(self):
        fsm = fsm_from_columns({"f_Wc": ["r_pc"]})
        fim, undet = R.fim_from_fsm(fsm)
        assert "f_paf" in undet
        i = R.FAULT_ORDER.index("f_paf")
        assert fim.values[i].all()

    @given(st.integers(0, 2**30 - 1))
    @settings(max_examples=30)
    def test_fim_reflexive_and_transitive(self, seed):
        rng = np.random.default_rng(seed)
        fsm = R.FSMMatrix(values=rng.random((9, 11)) < 0.4)
        fim, _ = R.fim_from_fsm(fsm)
        n = len(R.FAULT_ORDER)
        assert np.all(np.diag(fim.values))
        v = fim.values
        detectable = fsm.values.any(axis=0)
        for i in range(n):
            if not detectable[i]:
                continue  # undetectable rows are all ones by convention
            for j in range(n):
                for k in range(n):
                    if v[i, j] and v[j, k] and detectable[j]:
                        assert v[i, k]

    def test_expected_pattern_comparison(self):
        fsm = R.FSMMatrix(values=R.EXPECTED_FSM.copy())
        agreement, diffs = R.compare_fsm(fsm)
        assert agreement == 1.0 and diffs == []
        flipped = R.EXPECTED_FSM.copy()
        flipped[0, 0] = ~flipped[0, 0]
        agreement, diffs = R.compare_fsm(R.FSMMatrix(values=flipped))
        assert agreement == pytest.approx(98 / 99)
        assert diffs == [("r_Tc", "f_paf", 1, 0)]

    def test_render_and_save(self, tmp_path):
        fsm = R.FSMMatrix(values=R.EXPECTED_FSM.copy())
        text = fsm.render()
        assert "r_Waf" in text and "f_xth" in text
        fsm.save(tmp_path / "fsm.csv")
        lines = (tmp_path / "fsm.csv").read_text().strip().splitlines()
        assert len(lines) == 10  # header + 9 residual rows
