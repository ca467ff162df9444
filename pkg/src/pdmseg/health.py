"""Health index: inverted anomaly probability with two-threshold alarms.

1 is an optimal condition, 0 an imminent failure.  Warnings fire on the
smoothed trace below 0.5 (trend deterioration), alerts on the raw trace below
0.25 (acute events); both comparisons are strict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WARNING_THRESHOLD = 0.5
ALERT_THRESHOLD = 0.25


class HealthError(ValueError):
    pass


@dataclass(frozen=True)
class HealthSeries:
    hi: np.ndarray
    hi_smoothed: np.ndarray
    warnings: np.ndarray       # indices, hi_smoothed < 0.5
    alerts: np.ndarray         # indices, raw hi < 0.25
    smoothing_window: int
    warning_threshold: float = WARNING_THRESHOLD
    alert_threshold: float = ALERT_THRESHOLD


def health_index(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise HealthError("probabilities must lie in [0,1]")
    return 1.0 - p


def smooth_hi(hi: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 entries average the prefix."""
    if window < 1:
        raise HealthError("window must be >= 1")
    x = np.asarray(hi, dtype=float)
    cs = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(x.shape[0])
    lo = np.maximum(0, idx - window + 1)
    return (cs[idx + 1] - cs[lo]) / (idx + 1 - lo)


def compute_health(probs: np.ndarray, window: int = 60) -> HealthSeries:
    hi = health_index(probs)
    smoothed = smooth_hi(hi, window)
    return HealthSeries(
        hi=hi,
        hi_smoothed=smoothed,
        warnings=np.flatnonzero(smoothed < WARNING_THRESHOLD),
        alerts=np.flatnonzero(hi < ALERT_THRESHOLD),
        smoothing_window=window,
    )


def extract_alarms(series: HealthSeries, timestamps: np.ndarray | None = None) -> list[dict]:
    """Flatten warnings and alerts into a chronological alarm list."""
    alarms = []
    for i in series.warnings:
        alarms.append({"index": int(i), "kind": "warning"})
    for i in series.alerts:
        alarms.append({"index": int(i), "kind": "alert"})
    alarms.sort(key=lambda a: (a["index"], a["kind"] != "alert"))
    if timestamps is not None:
        for a in alarms:
            a["timestamp"] = float(timestamps[a["index"]])
    return alarms


def health_csv(series: HealthSeries, timestamps: np.ndarray | None = None) -> str:
    lines = ["window_index,timestamp,hi,hi_smoothed,warning,alert"]
    warn = set(int(i) for i in series.warnings)
    alert = set(int(i) for i in series.alerts)
    for i in range(series.hi.shape[0]):
        ts = repr(float(timestamps[i])) if timestamps is not None else ""
        lines.append(
            f"{i},{ts},{repr(float(series.hi[i]))},{repr(float(series.hi_smoothed[i]))},"
            f"{1 if i in warn else 0},{1 if i in alert else 0}"
        )
    return "\n".join(lines) + "\n"
