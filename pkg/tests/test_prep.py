"""Cleaning rules, shape classification, transforms, and channel selection."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from pdmseg import prep
from pdmseg.data_io import TimeSeriesFrame
from pdmseg.prep import (
    HEAVILY_SKEWED,
    MODERATELY_SKEWED,
    NEAR_SYMMETRIC,
    PrepError,
    classify_distribution,
    fit_yeo_johnson,
    yeo_johnson,
)


def _frame(cols: dict[str, np.ndarray], labels=None):
    n = len(next(iter(cols.values())))
    ts = 1e9 + 60.0 * np.arange(n)
    return TimeSeriesFrame(ts, list(cols), np.column_stack(list(cols.values())), labels)


class TestClean:
    def test_negative_and_missing_replaced_by_median(self):
        col = np.array([1.0, -5.0, 3.0, np.nan, 5.0])
        frame = _frame({"a": col, "b": np.arange(5.0)})
        cleaned, info = prep.clean(frame)
        # median over the valid subset {1, 3, 5}
        assert info["medians"]["a"] == 3.0
        assert cleaned.values[:, 0].tolist() == [1.0, 3.0, 3.0, 3.0, 5.0]

    def test_all_missing_channel_dropped(self):
        frame = _frame({"dead": np.full(4, np.nan), "b": np.arange(4.0)})
        cleaned, info = prep.clean(frame)
        assert cleaned.channels == ["b"]
        assert info["dropped_null_channels"] == ["dead"]

    def test_all_channels_missing_rejected(self):
        frame = _frame({"a": np.full(3, np.nan)})
        with pytest.raises(PrepError):
            prep.clean(frame)


class TestShapeClassification:
    def test_moments_match_scipy(self):
        rng = np.random.default_rng(0)
        x = rng.lognormal(size=2000)
        g1, g2 = prep.skewness_kurtosis(x)
        assert g1 == pytest.approx(stats.skew(x), abs=1e-10)
        assert g2 == pytest.approx(stats.kurtosis(x), abs=1e-10)

    def test_three_way_buckets(self):
        rng = np.random.default_rng(1)
        assert classify_distribution(rng.normal(size=4000)) == NEAR_SYMMETRIC
        assert classify_distribution(rng.lognormal(sigma=0.4, size=4000)) == MODERATELY_SKEWED
        assert classify_distribution(rng.lognormal(sigma=1.5, size=4000)) == HEAVILY_SKEWED

    def test_degenerate_column_is_symmetric(self):
        assert classify_distribution(np.full(10, 2.0)) == NEAR_SYMMETRIC


class TestYeoJohnson:
    def test_lambda_one_is_identity(self):
        x = np.linspace(-5, 5, 101)
        np.testing.assert_allclose(yeo_johnson(1.0, x), x, atol=1e-12)

    def test_strictly_monotone(self):
        x = np.linspace(-4, 4, 200)
        for lam in (-2.0, 0.0, 0.7, 2.0, 3.5):
            assert np.all(np.diff(yeo_johnson(lam, x)) > 0)

    def test_matches_scipy_transform(self):
        x = np.linspace(-3, 7, 50)
        for lam in (-0.5, 0.0, 0.5, 2.0):
            np.testing.assert_allclose(
                yeo_johnson(lam, x), stats.yeojohnson(x, lmbda=lam), atol=1e-10
            )

    def test_fitted_lambda_near_scipy_mle(self):
        rng = np.random.default_rng(2)
        x = rng.lognormal(size=3000)
        lam = fit_yeo_johnson(x)
        _, lam_scipy = stats.yeojohnson(x)
        assert lam == pytest.approx(lam_scipy, abs=0.02)

    def test_fit_reduces_skew(self):
        rng = np.random.default_rng(3)
        x = rng.lognormal(size=3000)
        lam = fit_yeo_johnson(x)
        g_before, _ = prep.skewness_kurtosis(x)
        g_after, _ = prep.skewness_kurtosis(np.asarray(yeo_johnson(lam, x)))
        assert abs(g_after) < abs(g_before)

    def test_degenerate_fit_rejected(self):
        with pytest.raises(PrepError):
            fit_yeo_johnson(np.full(10, 3.0))


class TestWinsorize:
    def test_bounds_are_quantiles(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=500)
        lo, hi = prep.winsorize_fit(x, 0.05, 0.95)
        assert lo == pytest.approx(np.quantile(x, 0.05))
        assert hi == pytest.approx(np.quantile(x, 0.95))

    def test_bad_quantiles_rejected(self):
        with pytest.raises(PrepError):
            prep.winsorize_fit(np.arange(10.0), 0.9, 0.1)


class TestRelevance:
    def test_anova_matches_scipy(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=300)
        y = rng.random(300) < 0.3
        x[y] += 0.8
        f, _ = stats.f_oneway(x[y], x[~y])
        assert prep.anova_f(x, y) == pytest.approx(float(f), rel=1e-10)

    def test_anova_needs_both_classes(self):
        with pytest.raises(PrepError):
            prep.anova_f(np.arange(5.0), np.ones(5, dtype=bool))

    def test_mutual_info_orders_dependence(self):
        rng = np.random.default_rng(6)
        y = rng.random(2000) < 0.5
        informative = y.astype(float) + 0.1 * rng.normal(size=2000)
        noise = rng.normal(size=2000)
        assert prep.mutual_info(informative, y) > prep.mutual_info(noise, y)
        assert prep.mutual_info(noise, y) < 0.01

    def test_mutual_info_constant_is_zero(self):
        y = np.array([True, False] * 10)
        assert prep.mutual_info(np.full(20, 1.0), y) == 0.0


class TestFitApplyPlan:
    def _labeled_frame(self):
        rng = np.random.default_rng(7)
        n = 1000
        labels = np.ones(n, dtype=bool)
        labels[600:700] = False
        cols = {
            "sym": rng.normal(50, 2, n),
            "skew": rng.lognormal(mean=2.0, sigma=1.6, size=n),
            "informative": rng.normal(10, 1, n) + 5.0 * (~labels),
            "flat": np.full(n, 3.0),
        }
        return _frame(cols, labels)

    def test_plan_round_trip_and_replay(self, tmp_path):
        frame = self._labeled_frame()
        plan = prep.fit_prep(frame, frame.labels)
        path = str(tmp_path / "plan.json")
        plan.save(path)
        loaded = prep.PrepPlan.load(path)
        assert loaded == plan
        out1 = prep.apply_prep(plan, frame)
        out2 = prep.apply_prep(loaded, frame)
        np.testing.assert_array_equal(out1.values, out2.values)
        assert out1.channels == plan.selected_channels

    def test_variance_gate_drops_flat_channel(self):
        frame = self._labeled_frame()
        plan = prep.fit_prep(frame, frame.labels)
        assert "flat" not in plan.selected_channels
        assert "informative" in plan.selected_channels

    def test_collinear_duplicate_pruned(self):
        rng = np.random.default_rng(8)
        n = 500
        labels = rng.random(n) < 0.8
        base = rng.normal(20, 3, n)
        frame = _frame(
            {"x": base, "x_copy": base + 1e-9 * rng.normal(size=n),
             "z": rng.normal(5, 1, n) + (~labels)},
            labels,
        )
        plan = prep.fit_prep(frame, frame.labels)
        assert len(plan.collinearity_dropped) == 1
        assert plan.collinearity_dropped[0] in ("x", "x_copy")

    def test_apply_requires_selected_channels(self):
        frame = self._labeled_frame()
        plan = prep.fit_prep(frame, frame.labels)
        missing = _frame({"sym": np.arange(10.0)})
        with pytest.raises(PrepError):
            prep.apply_prep(plan, missing)

    def test_unsupported_schema_rejected(self):
        with pytest.raises(PrepError):
            prep.PrepPlan.from_dict({"schema_version": 99})
