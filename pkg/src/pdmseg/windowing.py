"""Sliding-window featurization, forward-horizon labels, segmentation features.

Windows of ``window_len`` samples predict whether any sample in the following
``horizon`` samples is anomalous.  Temporal splitting discards boundary
windows so no sample index ever leaks between train and test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .changefinder import ScoreSeries, Segmentation
from .data_io import TimeSeriesFrame


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    window_len: int
    stride: int
    horizon: int

    def __post_init__(self):
        if self.window_len < 2:
            raise WindowError("window_len must be >= 2")
        if self.stride < 1 or self.horizon < 1:
            raise WindowError("stride and horizon must be >= 1")

    @staticmethod
    def from_cadence(
        frame: TimeSeriesFrame,
        minutes: float = 30.0,
        stride: Optional[int] = None,
        horizon: Optional[int] = None,
    ) -> "WindowSpec":
        """Convert a wall-time window to a sample count via the median cadence."""
        if frame.n_samples < 2:
            raise WindowError("need at least 2 samples to infer cadence")
        cadence = float(np.median(np.diff(frame.timestamps)))
        wl = max(2, int(round(minutes * 60.0 / cadence)))
        eff_stride = stride if stride is not None else max(1, wl // 3)
        return WindowSpec(
            window_len=wl,
            stride=eff_stride,
            # default one-stride lookahead: every sample labels exactly one window
            horizon=horizon if horizon is not None else eff_stride,
        )


BASE_STATS = ["mean", "std", "min", "max", "last", "slope", "absdiff", "exceed"]

SEG_FEATURES = [
    "seg__mean_change_score",
    "seg__max_change_score",
    "seg__time_since_change",
    "seg__straddles_change_point",
]


@dataclass(frozen=True)
class WindowDataset:
    features: np.ndarray            # [n_windows, n_features]
    labels: np.ndarray              # bool, True = anomalous horizon
    feature_names: list[str]
    window_meta: np.ndarray         # [n_windows, 3]: start, end, horizon_end

    def __post_init__(self):
        if self.features.shape[1] != len(self.feature_names):
            raise WindowError("feature count must match names")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise WindowError("feature names must be unique")

    @property
    def n_windows(self) -> int:
        return int(self.features.shape[0])


def fit_exceedance_thresholds(frame: TimeSeriesFrame) -> dict[str, float]:
    """Per-channel 95th-percentile thresholds, fitted once on training data."""
    return {
        ch: float(np.quantile(frame.values[:, j], 0.95))
        for j, ch in enumerate(frame.channels)
    }


def extract_features(window: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Per-channel summary statistics for one window slice [window_len, n_channels]."""
    w = np.asarray(window, dtype=float)
    ln, d = w.shape
    t = np.arange(ln, dtype=float)
    tc = t - t.mean()
    denom = float(np.sum(tc * tc))
    mean = w.mean(axis=0)
    std = w.std(axis=0)
    slope = (tc @ w) / denom
    absdiff = np.mean(np.abs(np.diff(w, axis=0)), axis=0)
    exceed = np.sum(w > thresholds[None, :], axis=0).astype(float)
    feats = np.empty(d * len(BASE_STATS))
    for j in range(d):
        feats[j * 8: j * 8 + 8] = (
            mean[j], std[j], w[:, j].min(), w[:, j].max(), w[-1, j],
            slope[j], absdiff[j], exceed[j],
        )
    return feats


def make_windows(
    frame: TimeSeriesFrame,
    spec: WindowSpec,
    thresholds: Optional[dict[str, float]] = None,
) -> WindowDataset:
    """Slide windows over a labeled frame; label = any anomalous sample in horizon."""
    if frame.labels is None:
        raise WindowError("frame must be labeled")
    n = frame.n_samples
    if n < spec.window_len + spec.horizon:
        raise WindowError("series too short for window + horizon")
    if thresholds is None:
        thresholds = fit_exceedance_thresholds(frame)
    thr = np.array([thresholds[ch] for ch in frame.channels])
    anomalous = ~frame.labels
    starts = list(range(0, n - spec.window_len - spec.horizon + 1, spec.stride))
    feats = np.empty((len(starts), frame.n_channels * len(BASE_STATS)))
    labels = np.empty(len(starts), dtype=bool)
    meta = np.empty((len(starts), 3), dtype=int)
    for i, s in enumerate(starts):
        e = s + spec.window_len
        h = e + spec.horizon
        feats[i] = extract_features(frame.values[s:e], thr)
        labels[i] = bool(anomalous[e:h].any())
        meta[i] = (s, e, h)
    names = [f"{ch}__{stat}" for ch in frame.channels for stat in BASE_STATS]
    return WindowDataset(feats, labels, names, meta)


def augment_with_segmentation(
    dataset: WindowDataset,
    scores: ScoreSeries,
    seg: Segmentation,
    drop_straddling: bool = False,
) -> WindowDataset:
    """Append change-score and change-point proximity features per window."""
    n = scores.n
    if dataset.n_windows and int(dataset.window_meta[:, 2].max()) > n:
        raise WindowError("window index space exceeds score series length")
    cps = np.asarray(seg.change_points, dtype=int)
    extra = np.empty((dataset.n_windows, 4))
    keep = np.ones(dataset.n_windows, dtype=bool)
    cs = scores.change_score
    for i in range(dataset.n_windows):
        s, e, _ = dataset.window_meta[i]
        win = cs[s:e]
        extra[i, 0] = float(win.mean())
        extra[i, 1] = float(win.max())
        before = cps[cps <= e - 1]
        extra[i, 2] = float(e - 1 - before[-1]) if before.size else float(n)
        straddles = bool(((cps > s) & (cps < e - 1)).any())
        extra[i, 3] = 1.0 if straddles else 0.0
        if drop_straddling and straddles:
            keep[i] = False
    features = np.hstack([dataset.features, extra])[keep]
    return WindowDataset(
        features,
        dataset.labels[keep],
        dataset.feature_names + SEG_FEATURES,
        dataset.window_meta[keep],
    )


def temporal_split(
    dataset: WindowDataset, split_index: int
) -> tuple[WindowDataset, WindowDataset]:
    """Split by sample index; windows crossing the boundary are discarded."""
    starts = dataset.window_meta[:, 0]
    horizon_ends = dataset.window_meta[:, 2]
    train_mask = horizon_ends <= split_index
    test_mask = starts >= split_index
    if not train_mask.any():
        raise WindowError("empty train partition")
    if not test_mask.any():
        raise WindowError("empty test partition")

    def subset(mask):
        return WindowDataset(
            dataset.features[mask],
            dataset.labels[mask],
            list(dataset.feature_names),
            dataset.window_meta[mask],
        )

    return subset(train_mask), subset(test_mask)


def dataset_csv(dataset: WindowDataset) -> str:
    lines = [",".join(["start", "end", "horizon_end"] + dataset.feature_names + ["label_anomalous"])]
    for i in range(dataset.n_windows):
        s, e, h = dataset.window_meta[i]
        vals = [repr(float(v)) for v in dataset.features[i]]
        lines.append(",".join([str(s), str(e), str(h)] + vals + ["1" if dataset.labels[i] else "0"]))
    return "\n".join(lines) + "\n"
