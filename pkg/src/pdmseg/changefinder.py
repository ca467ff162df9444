"""Two-stage online change scoring on sequentially discounting AR estimation.

Stage 1 scores each sample by the negative log-density of an online AR(k)
predictor whose statistics decay geometrically with rate r.  The smoothed
stage-1 scores feed an identical second stage whose smoothed output is the
change score.  Pure AR only: the I and MA terms are fixed to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data_io import TimeSeriesFrame

VARIANCE_FLOOR = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)

# stage-2 scores are winsorized against slow running statistics before the
# final smoothing: a lone heavy-tailed log-loss spike must not look like a
# sustained regime change.  The running stats decay 5x slower than r.
CLIP_SIGMA = 2.0
STAT_RATE_FACTOR = 0.2
SD_FLOOR_FRAC = 0.5


class ChangeFinderError(ValueError):
    pass


@dataclass(frozen=True)
class ChangeFinderConfig:
    r: float = 0.05
    order: int = 1
    smooth: int = 5
    threshold: float = 1.8
    min_gap: Optional[int] = None         # default: smooth
    absolute_threshold: bool = False      # compare change_score to threshold directly

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise ChangeFinderError("r must be in (0,1)")
        if self.order < 1:
            raise ChangeFinderError("order must be >= 1")
        if self.smooth < 2:
            raise ChangeFinderError("smooth must be >= 2")
        if self.threshold <= 0:
            raise ChangeFinderError("threshold must be > 0")
        if self.min_gap is not None and self.min_gap < 1:
            raise ChangeFinderError("min_gap must be >= 1")

    @property
    def effective_min_gap(self) -> int:
        return self.smooth if self.min_gap is None else self.min_gap


# Known-good parameter tuples, shipped as named presets.
PRESETS: dict[str, ChangeFinderConfig] = {
    "f1_optimal": ChangeFinderConfig(r=0.05, order=1, smooth=5, threshold=1.8),
    "cs_optimal": ChangeFinderConfig(r=0.1, order=1, smooth=10, threshold=1.5),
}


def levinson_durbin(autocov: Sequence[float]) -> list[float]:
    """Solve the Toeplitz Yule-Walker system for AR coefficients.

    If a reflection coefficient goes non-finite or |kappa| >= 1 the recursion
    is truncated at the last stable order and the remaining coefficients stay 0.
    """
    c = list(autocov)
    c0 = c[0]
    if not (c0 > 0):
        raise ChangeFinderError("autocovariance c_0 must be positive")
    k = len(c) - 1
    a = [0.0] * k
    err = c0
    for m in range(1, k + 1):
        acc = c[m]
        for j in range(m - 1):
            acc -= a[j] * c[m - 1 - j]
        kappa = acc / err
        if not math.isfinite(kappa) or abs(kappa) >= 1.0:
            break
        prev = a[: m - 1]
        for j in range(m - 1):
            a[j] = prev[j] - kappa * prev[m - 2 - j]
        a[m - 1] = kappa
        err *= 1.0 - kappa * kappa
        if err <= 0:
            break
    return a


class Sdar:
    """Sequentially discounting AR(k) estimator; strictly sequential recursion."""

    def __init__(self, r: float, order: int):
        self.r = float(r)
        self.k = int(order)
        self.mu = 0.0
        self.c = [0.0] * (self.k + 1)
        self.sigma2 = 1.0
        self.lag = []        # most recent first
        self.n_seen = 0
        self.omega = [0.0] * self.k

    def update(self, x: float) -> float:
        """Advance one step; returns the log-loss score (0 during warm-up)."""
        if not math.isfinite(x):
            raise ChangeFinderError("non-finite input")
        r = self.r
        self.n_seen += 1
        mu = (1.0 - r) * self.mu + r * x
        self.mu = mu
        d0 = x - mu
        c = self.c
        c[0] = (1.0 - r) * c[0] + r * d0 * d0
        lag = self.lag
        for j in range(1, min(self.k, len(lag)) + 1):
            c[j] = (1.0 - r) * c[j] + r * d0 * (lag[j - 1] - mu)
        if self.n_seen <= self.k:
            lag.insert(0, x)
            return 0.0
        if c[0] > 0:
            self.omega = levinson_durbin(c)
        xhat = mu
        omega = self.omega
        for j in range(self.k):
            xhat += omega[j] * (lag[j] - mu)
        e = x - xhat
        self.sigma2 = max(VARIANCE_FLOOR, (1.0 - r) * self.sigma2 + r * e * e)
        score = 0.5 * (_LOG_2PI + math.log(self.sigma2)) + e * e / (2.0 * self.sigma2)
        lag.insert(0, x)
        if len(lag) > self.k:
            lag.pop()
        return score


@dataclass(frozen=True)
class ScoreSeries:
    """Per-sample outlier and change scores with a warm-up marker.

    ``detection_score`` is a robust variant of the change score (stage-2
    scores winsorized before smoothing); thresholding happens on it so that
    lone log-loss spikes cannot fire a change point.
    """

    outlier_score: np.ndarray
    smoothed_outlier: np.ndarray
    change_score: np.ndarray
    detection_score: np.ndarray
    valid_from: int
    r: float

    def __post_init__(self):
        n = self.outlier_score.shape[0]
        if self.smoothed_outlier.shape[0] != n or self.change_score.shape[0] != n \
                or self.detection_score.shape[0] != n:
            raise ChangeFinderError("score series lengths differ")

    @property
    def n(self) -> int:
        return int(self.outlier_score.shape[0])


@dataclass(frozen=True)
class Segmentation:
    """Change points plus the half-open segment partition of [0, n)."""

    change_points: list[int]
    segments: list[tuple[int, int]]

    def __post_init__(self):
        for (a, b), (c, d) in zip(self.segments, self.segments[1:]):
            if b != c:
                raise ChangeFinderError("segments must be contiguous")

    @property
    def n(self) -> int:
        return self.segments[-1][1] if self.segments else 0


def trailing_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 entries average the prefix."""
    x = np.asarray(x, dtype=float)
    cs = np.concatenate([[0.0], np.cumsum(x)])
    n = x.shape[0]
    idx = np.arange(n)
    lo = np.maximum(0, idx - window + 1)
    return (cs[idx + 1] - cs[lo]) / (idx + 1 - lo)


def changefinder_score(series: np.ndarray, config: ChangeFinderConfig) -> ScoreSeries:
    """Two-stage scoring of a univariate series."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n <= 2 * (config.smooth + config.order):
        raise ChangeFinderError("series too short for configuration")
    stage1 = Sdar(config.r, config.order)
    outlier = np.empty(n)
    for t in range(n):
        outlier[t] = stage1.update(float(x[t]))
    smoothed = trailing_mean(outlier, config.smooth)
    stage2 = Sdar(config.r, config.order)
    second = np.empty(n)
    for t in range(n):
        second[t] = stage2.update(float(smoothed[t]))
    valid_from = 2 * config.smooth + 2 * config.order
    # winsorize the second-stage scores against a discounted running mean so a
    # single outlier cannot dominate the detection series; the running std is
    # floored at a fraction of the global spread so spikes in quiet stretches
    # are damped, not erased
    floor = SD_FLOOR_FRAC * float(second[valid_from:].std()) if n > valid_from else 0.0
    clipped = np.empty(n)
    r_stat = config.r * STAT_RATE_FACTOR
    m = float(second[0])
    v = 0.0
    for t in range(n):
        s = float(second[t])
        sd = max(math.sqrt(v), floor)
        c = min(s, m + CLIP_SIGMA * sd) if sd > 0 else s
        clipped[t] = c
        m = (1.0 - r_stat) * m + r_stat * c
        v = (1.0 - r_stat) * v + r_stat * (c - m) ** 2
    w2 = max(2, round(config.smooth / 2))
    change = trailing_mean(second, w2)
    detection = trailing_mean(clipped, w2)
    return ScoreSeries(outlier, smoothed, change, detection, valid_from, config.r)


def detect_change_points(
    scores: ScoreSeries,
    threshold: float,
    min_gap: int,
    absolute: bool = False,
) -> Segmentation:
    """Threshold the robust change score against a discounted running mean + std.

    Detection starts once the running statistics have burned in (about one
    discounting time constant past ``valid_from``).  With ``absolute=True``
    the raw change score is compared to ``threshold`` directly instead.
    """
    s = scores.detection_score
    n = s.shape[0]
    r_stat = scores.r * STAT_RATE_FACTOR
    start = scores.valid_from + min(250, int(math.ceil(1.0 / r_stat)))
    # floor the running std at a fraction of the global spread so quiet
    # stretches do not turn ordinary wiggles into detections
    floor = SD_FLOOR_FRAC * float(s[scores.valid_from:].std()) if n > scores.valid_from else 0.0
    points: list[int] = []
    m = float(s[0]) if n else 0.0
    v = 0.0
    last = -min_gap
    for t in range(n):
        st = float(s[t])
        if absolute:
            is_cp = st > threshold
        else:
            sd = max(math.sqrt(v), floor)
            is_cp = st > m + threshold * sd and sd > 0
        if is_cp and t >= start and t - last >= min_gap:
            points.append(t)
            last = t
        m = (1.0 - r_stat) * m + r_stat * st
        v = (1.0 - r_stat) * v + r_stat * (st - m) ** 2
    bounds = [0] + points + [n]
    segments = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)
                if bounds[i + 1] > bounds[i]]
    return Segmentation(points, segments)


def _znorm(x: np.ndarray, valid_from: int) -> np.ndarray:
    tail = x[valid_from:]
    mu = float(tail.mean()) if tail.size else 0.0
    sd = float(tail.std()) if tail.size else 0.0
    if sd <= 0:
        return x - mu
    return (x - mu) / sd


def score_multichannel(frame: TimeSeriesFrame, config: ChangeFinderConfig) -> ScoreSeries:
    """Per-channel scoring, z-normalized over the post-warm-up range, averaged."""
    if frame.n_channels == 0:
        raise ChangeFinderError("frame has no channels")
    per = [changefinder_score(frame.values[:, j], config) for j in range(frame.n_channels)]
    valid_from = max(p.valid_from for p in per)
    agg_out = np.mean([_znorm(p.outlier_score, valid_from) for p in per], axis=0)
    agg_sm = np.mean([_znorm(p.smoothed_outlier, valid_from) for p in per], axis=0)
    agg_ch = np.mean([_znorm(p.change_score, valid_from) for p in per], axis=0)
    agg_det = np.mean([_znorm(p.detection_score, valid_from) for p in per], axis=0)
    return ScoreSeries(agg_out, agg_sm, agg_ch, agg_det, valid_from, config.r)
