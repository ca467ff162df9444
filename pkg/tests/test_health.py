"""Health index inversion, smoothing, and the two-threshold alarm rules."""

from __future__ import annotations

import io

import numpy as np
import pandas as pd
import pytest

from pdmseg.health import (
    ALERT_THRESHOLD,
    WARNING_THRESHOLD,
    HealthError,
    compute_health,
    extract_alarms,
    health_csv,
    health_index,
    smooth_hi,
)


class TestHealthIndex:
    def test_exact_inversion(self):
        p = np.array([0.0, 0.25, 0.5, 1.0])
        np.testing.assert_array_equal(health_index(p), 1.0 - p)

    def test_out_of_range_rejected(self):
        with pytest.raises(HealthError):
            health_index(np.array([1.2]))
        with pytest.raises(HealthError):
            health_index(np.array([-0.1]))


class TestSmoothing:
    def test_trailing_average_oracle(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(smooth_hi(x, 2), [1.0, 1.5, 2.5, 3.5])

    def test_window_one_is_identity(self):
        x = np.random.default_rng(0).random(20)
        np.testing.assert_allclose(smooth_hi(x, 1), x, atol=1e-12)

    def test_bad_window_rejected(self):
        with pytest.raises(HealthError):
            smooth_hi(np.ones(3), 0)


class TestAlarms:
    def test_strict_thresholds(self):
        # hi exactly at a threshold must NOT fire that alarm
        at_warning = compute_health(np.array([1.0 - WARNING_THRESHOLD]), window=1)
        assert at_warning.warnings.size == 0
        at_alert = compute_health(np.array([1.0 - ALERT_THRESHOLD]), window=1)
        assert at_alert.alerts.size == 0
        # just below fires
        below = compute_health(np.array([1.0 - ALERT_THRESHOLD + 1e-9]), window=1)
        assert below.alerts.tolist() == [0]

    def test_warning_on_smoothed_alert_on_raw(self):
        probs = np.array([0.0, 0.0, 0.9, 0.0, 0.0])
        series = compute_health(probs, window=3)
        # raw hi dips to 0.1 at index 2 -> alert there
        assert series.alerts.tolist() == [2]
        # smoothed trace (window 3) stays at or above 0.7 -> no warning
        assert series.warnings.size == 0

    def test_sustained_degradation_warns(self):
        probs = np.full(10, 0.6)
        series = compute_health(probs, window=3)
        assert series.warnings.tolist() == list(range(10))
        assert series.alerts.size == 0

    def test_extract_alarms_sorted_with_timestamps(self):
        probs = np.array([0.9, 0.1, 0.8])
        series = compute_health(probs, window=1)
        ts = np.array([100.0, 200.0, 300.0])
        alarms = extract_alarms(series, ts)
        assert [a["index"] for a in alarms] == sorted(a["index"] for a in alarms)
        for a in alarms:
            assert a["timestamp"] == ts[a["index"]]
        kinds = {(a["index"], a["kind"]) for a in alarms}
        assert (0, "alert") in kinds and (0, "warning") in kinds


class TestCsv:
    def test_parses_and_flags_match(self):
        probs = np.array([0.9, 0.2, 0.6, 0.05])
        series = compute_health(probs, window=2)
        df = pd.read_csv(io.StringIO(health_csv(series)))
        np.testing.assert_allclose(df["hi"].to_numpy(), series.hi)
        warn_idx = df.index[df["warning"] == 1].tolist()
        assert warn_idx == series.warnings.tolist()
        alert_idx = df.index[df["alert"] == 1].tolist()
        assert alert_idx == series.alerts.tolist()
