"""Two-stage change scoring: SDAR recursion, smoothing, and thresholding."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_toeplitz

from pdmseg.changefinder import (
    PRESETS,
    ChangeFinderConfig,
    ChangeFinderError,
    Sdar,
    changefinder_score,
    detect_change_points,
    levinson_durbin,
    score_multichannel,
    trailing_mean,
)
from pdmseg.data_io import TimeSeriesFrame


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"r": 0.0}, {"r": 1.0}, {"order": 0}, {"smooth": 1},
         {"threshold": 0.0}, {"min_gap": 0}],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ChangeFinderError):
            ChangeFinderConfig(**kwargs)

    def test_min_gap_defaults_to_smooth(self):
        assert ChangeFinderConfig(smooth=7).effective_min_gap == 7
        assert ChangeFinderConfig(smooth=7, min_gap=3).effective_min_gap == 3

    def test_presets_available(self):
        assert set(PRESETS) == {"f1_optimal", "cs_optimal"}
        assert PRESETS["f1_optimal"].r == 0.05
        assert PRESETS["cs_optimal"].smooth == 10


class TestLevinsonDurbin:
    def test_matches_toeplitz_solve(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=5000)
        for t in range(2, x.size):
            x[t] += 0.5 * x[t - 1] - 0.2 * x[t - 2]
        n = x.size
        xc = x - x.mean()
        for k in (1, 2, 3):
            c = [float(xc[: n - j] @ xc[j:]) / n for j in range(k + 1)]
            want = solve_toeplitz(c[:k], c[1 : k + 1])
            np.testing.assert_allclose(levinson_durbin(c), want, atol=1e-10)

    def test_nonpositive_c0_rejected(self):
        with pytest.raises(ChangeFinderError):
            levinson_durbin([0.0, 0.1])

    def test_unstable_reflection_truncates(self):
        # c1 > c0 gives |kappa| >= 1 at order 1; coefficients stay zero
        assert levinson_durbin([1.0, 2.0]) == [0.0]


class TestSdar:
    def test_constant_series_mean_converges(self):
        est = Sdar(r=0.1, order=1)
        for _ in range(200):
            est.update(4.2)
        assert abs(est.mu - 4.2) < 1e-6

    def test_warmup_scores_zero(self):
        est = Sdar(r=0.05, order=3)
        scores = [est.update(float(v)) for v in np.arange(6.0)]
        assert scores[:3] == [0.0, 0.0, 0.0]
        assert scores[3] != 0.0

    def test_non_finite_input_rejected(self):
        est = Sdar(r=0.05, order=1)
        with pytest.raises(ChangeFinderError):
            est.update(float("nan"))

    def test_surprise_scores_higher(self):
        rng = np.random.default_rng(1)
        est = Sdar(r=0.05, order=1)
        for v in rng.normal(size=500):
            typical = est.update(float(v))
        surprising = est.update(25.0)
        assert surprising > typical + 5.0


class TestTrailingMean:
    def test_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=57)
        got = trailing_mean(x, 5)
        want = np.array([x[max(0, i - 4) : i + 1].mean() for i in range(57)])
        np.testing.assert_allclose(got, want, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=80),
        st.integers(1, 20),
    )
    def test_property_matches_prefix_average(self, xs, window):
        x = np.asarray(xs)
        got = trailing_mean(x, window)
        want = np.array([x[max(0, i - window + 1) : i + 1].mean() for i in range(x.size)])
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-6)


class TestChangefinderScore:
    CF = ChangeFinderConfig(r=0.05, order=1, smooth=5, threshold=1.8)

    def test_shapes_and_valid_from(self):
        x = np.random.default_rng(3).normal(size=400)
        s = changefinder_score(x, self.CF)
        assert s.n == 400
        assert s.valid_from == 2 * self.CF.smooth + 2 * self.CF.order
        for arr in (s.outlier_score, s.smoothed_outlier, s.change_score, s.detection_score):
            assert arr.shape == (400,)
            assert np.isfinite(arr).all()

    def test_short_series_rejected(self):
        with pytest.raises(ChangeFinderError):
            changefinder_score(np.zeros(12), self.CF)

    def test_detection_score_never_exceeds_change_score_peaks(self):
        # winsorization can only pull the detection series down
        rng = np.random.default_rng(4)
        x = rng.normal(size=600)
        x[300] += 30.0  # lone spike
        s = changefinder_score(x, self.CF)
        assert s.detection_score.max() <= s.change_score.max() + 1e-12

    def test_step_raises_change_score(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=800)
        x[400:] += 5.0
        s = changefinder_score(x, self.CF)
        window = s.change_score[400:420]
        baseline = s.change_score[s.valid_from : 380]
        assert window.max() > baseline.mean() + 4.0 * baseline.std()


class TestDetectChangePoints:
    CF = PRESETS["f1_optimal"]

    def _scored_step(self, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=1200)
        x[600:] += 5.0
        return changefinder_score(x, self.CF)

    def test_finds_step_near_truth(self):
        s = self._scored_step()
        seg = detect_change_points(s, self.CF.threshold, self.CF.effective_min_gap)
        assert any(abs(p - 600) <= 2 * self.CF.smooth for p in seg.change_points)

    def test_min_gap_enforced(self):
        s = self._scored_step()
        seg = detect_change_points(s, 1.0, min_gap=50)
        gaps = np.diff(seg.change_points)
        assert (gaps >= 50).all()

    def test_segments_partition_axis(self):
        s = self._scored_step()
        seg = detect_change_points(s, self.CF.threshold, self.CF.effective_min_gap)
        assert seg.segments[0][0] == 0
        assert seg.segments[-1][1] == s.n
        for (a, b), (c, d) in zip(seg.segments, seg.segments[1:]):
            assert b == c
        assert seg.change_points == [b for _, b in seg.segments[:-1]]

    def test_absolute_threshold_mode(self):
        s = self._scored_step()
        hi = float(s.detection_score.max())
        none = detect_change_points(s, hi + 1.0, 5, absolute=True)
        some = detect_change_points(s, float(np.quantile(s.detection_score, 0.99)), 5,
                                    absolute=True)
        assert none.change_points == []
        assert some.change_points


class TestMultichannel:
    def test_average_of_normalized_channels(self):
        rng = np.random.default_rng(6)
        n = 500
        vals = rng.normal(size=(n, 3))
        ts = 1e9 + 60.0 * np.arange(n)
        frame = TimeSeriesFrame(ts, ["a", "b", "c"], vals)
        cf = ChangeFinderConfig()
        agg = score_multichannel(frame, cf)
        assert agg.n == n
        # each per-channel series is z-normalized over the valid range, so the
        # aggregate mean over that range is ~0
        assert abs(agg.change_score[agg.valid_from :].mean()) < 1e-8

    def test_empty_frame_rejected(self):
        frame = TimeSeriesFrame(np.arange(3.0), [], np.empty((3, 0)))
        with pytest.raises(ChangeFinderError):
            score_multichannel(frame, ChangeFinderConfig())
