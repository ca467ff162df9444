"""Distribution-aware preprocessing: cleaning, shape-driven transforms, selection.

Every decision made at fit time is captured in a PrepPlan and replayed verbatim
on new data, so development and production see identical preprocessing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data_io import TimeSeriesFrame

NEAR_SYMMETRIC = "near_symmetric"
MODERATELY_SKEWED = "moderately_skewed"
HEAVILY_SKEWED = "heavily_skewed"

PLAN_SCHEMA_VERSION = 1


class PrepError(ValueError):
    pass


@dataclass(frozen=True)
class PrepConfig:
    skew_moderate: float = 0.5
    skew_heavy: float = 2.0
    kurtosis_gate: float = 10.0
    winsor_lo: float = 0.01
    winsor_hi: float = 0.99
    variance_floor: float = 1e-8
    top_k: int = 20
    corr_threshold: float = 0.95
    mi_bins: int = 16


@dataclass(frozen=True)
class ColumnTransform:
    """Fitted per-channel transform: impute, optional clip, optional power transform."""

    impute_median: float
    clip: Optional[tuple[float, float]] = None   # winsorization bounds, data space
    lam: Optional[float] = None                  # Yeo-Johnson lambda

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = np.array(x, dtype=float, copy=True)
        bad = np.isnan(out) | (out < 0)
        out[bad] = self.impute_median
        if self.clip is not None:
            out = np.clip(out, self.clip[0], self.clip[1])
        if self.lam is not None:
            out = yeo_johnson(self.lam, out)
        return out


@dataclass(frozen=True)
class PrepPlan:
    dropped_null_channels: list[str]
    transforms: dict[str, ColumnTransform]
    selected_channels: list[str]
    relevance_scores: dict[str, tuple[float, float]]   # channel -> (anova_f, mutual_info)
    collinearity_dropped: list[str]

    def to_dict(self) -> dict:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "dropped_null_channels": list(self.dropped_null_channels),
            "transforms": {
                ch: {
                    "impute_median": t.impute_median,
                    "clip_lo": None if t.clip is None else t.clip[0],
                    "clip_hi": None if t.clip is None else t.clip[1],
                    "lambda": t.lam,
                }
                for ch, t in self.transforms.items()
            },
            "selected_channels": list(self.selected_channels),
            "relevance_scores": {ch: [f, mi] for ch, (f, mi) in self.relevance_scores.items()},
            "collinearity_dropped": list(self.collinearity_dropped),
        }

    @staticmethod
    def from_dict(d: dict) -> "PrepPlan":
        if d.get("schema_version") != PLAN_SCHEMA_VERSION:
            raise PrepError(f"unsupported plan schema_version {d.get('schema_version')}")
        transforms = {}
        for ch, t in d["transforms"].items():
            clip = None
            if t["clip_lo"] is not None:
                clip = (t["clip_lo"], t["clip_hi"])
            transforms[ch] = ColumnTransform(t["impute_median"], clip, t["lambda"])
        return PrepPlan(
            dropped_null_channels=list(d["dropped_null_channels"]),
            transforms=transforms,
            selected_channels=list(d["selected_channels"]),
            relevance_scores={ch: (v[0], v[1]) for ch, v in d["relevance_scores"].items()},
            collinearity_dropped=list(d["collinearity_dropped"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @staticmethod
    def load(path: str) -> "PrepPlan":
        with open(path, "r", encoding="utf-8") as fh:
            return PrepPlan.from_dict(json.load(fh))


def clean(frame: TimeSeriesFrame) -> tuple[TimeSeriesFrame, dict]:
    """Drop all-missing channels; replace negatives and missing with the channel median.

    The median is computed over non-missing, non-negative values only, since
    negative readings are treated as sensor faults.
    """
    keep, dropped, medians = [], [], {}
    cols = []
    for j, ch in enumerate(frame.channels):
        col = frame.values[:, j]
        valid = col[~np.isnan(col) & (col >= 0)]
        if np.all(np.isnan(col)):
            dropped.append(ch)
            continue
        med = float(np.median(valid)) if valid.size else 0.0
        out = np.array(col, copy=True)
        out[np.isnan(out) | (out < 0)] = med
        keep.append(ch)
        medians[ch] = med
        cols.append(out)
    if not keep:
        raise PrepError("all channels entirely missing")
    cleaned = TimeSeriesFrame(
        frame.timestamps, keep, np.column_stack(cols), frame.labels
    )
    return cleaned, {"dropped_null_channels": dropped, "medians": medians}


def skewness_kurtosis(x: np.ndarray) -> tuple[float, float]:
    """Sample skewness g1 and excess kurtosis g2 (moment estimators)."""
    x = np.asarray(x, dtype=float)
    m = x.mean()
    d = x - m
    m2 = np.mean(d * d)
    if m2 <= 0:
        return 0.0, 0.0
    g1 = np.mean(d ** 3) / m2 ** 1.5
    g2 = np.mean(d ** 4) / m2 ** 2 - 3.0
    return float(g1), float(g2)


def classify_distribution(
    column: np.ndarray, config: PrepConfig = PrepConfig()
) -> str:
    """Three-way shape classification on |skewness| and excess kurtosis."""
    col = np.asarray(column, dtype=float)
    col = col[~np.isnan(col)]
    if col.size == 0 or np.var(col) <= 0:
        return NEAR_SYMMETRIC
    g1, g2 = skewness_kurtosis(col)
    if abs(g1) < config.skew_moderate:
        return NEAR_SYMMETRIC
    if abs(g1) < config.skew_heavy and g2 < config.kurtosis_gate:
        return MODERATELY_SKEWED
    return HEAVILY_SKEWED


def yeo_johnson(lam: float, x) -> np.ndarray | float:
    """Yeo-Johnson power transform, defined for all real x."""
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    pos = arr >= 0
    if lam != 0:
        out[pos] = (np.power(arr[pos] + 1.0, lam) - 1.0) / lam
    else:
        out[pos] = np.log1p(arr[pos])
    neg = ~pos
    if lam != 2:
        out[neg] = -(np.power(-arr[neg] + 1.0, 2.0 - lam) - 1.0) / (2.0 - lam)
    else:
        out[neg] = -np.log1p(-arr[neg])
    if np.isscalar(x):
        return float(out)
    return out


def _yj_loglik(lam: float, x: np.ndarray) -> float:
    y = yeo_johnson(lam, x)
    var = float(np.var(y))
    if var <= 0:
        return -math.inf
    n = x.size
    jac = (lam - 1.0) * float(np.sum(np.sign(x) * np.log1p(np.abs(x))))
    return -0.5 * n * math.log(var) + jac


def fit_yeo_johnson(column: np.ndarray, tol: float = 1e-4) -> float:
    """Maximum-likelihood lambda: coarse grid on [-5, 5] then golden-section refine."""
    x = np.asarray(column, dtype=float)
    x = x[~np.isnan(x)]
    if x.size < 2 or np.var(x) <= 0:
        raise PrepError("degenerate column for Yeo-Johnson fit")
    grid = np.arange(-5.0, 5.0 + 1e-9, 0.1)
    lls = np.array([_yj_loglik(l, x) for l in grid])
    i = int(np.argmax(lls))
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = _yj_loglik(c, x), _yj_loglik(d, x)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _yj_loglik(c, x)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _yj_loglik(d, x)
    return float((a + b) / 2.0)


def winsorize_fit(column: np.ndarray, p_lo: float, p_hi: float) -> tuple[float, float]:
    """Empirical clip bounds at the given quantiles (linear interpolation)."""
    if not (0.0 <= p_lo < p_hi <= 1.0):
        raise PrepError("need 0 <= p_lo < p_hi <= 1")
    x = np.asarray(column, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise PrepError("empty column")
    lo = float(np.quantile(x, p_lo))
    hi = float(np.quantile(x, p_hi))
    return lo, hi


def anova_f(column: np.ndarray, labels: np.ndarray) -> float:
    """One-way F statistic for the two label groups; +inf when within-variance is 0."""
    x = np.asarray(column, dtype=float)
    y = np.asarray(labels, dtype=bool)
    a, b = x[y], x[~y]
    if a.size == 0 or b.size == 0:
        raise PrepError("both classes must be present")
    n = x.size
    grand = x.mean()
    ssb = a.size * (a.mean() - grand) ** 2 + b.size * (b.mean() - grand) ** 2
    ssw = float(np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2))
    if ssw <= 0:
        return math.inf
    return float((ssb / 1.0) / (ssw / (n - 2)))


def mutual_info(column: np.ndarray, labels: np.ndarray, n_bins: int = 16) -> float:
    """Plug-in mutual information (nats) with equal-width binning of the column."""
    if n_bins < 2:
        raise PrepError("n_bins must be >= 2")
    x = np.asarray(column, dtype=float)
    y = np.asarray(labels, dtype=bool)
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi <= lo:
        return 0.0
    bins = np.minimum(((x - lo) / (hi - lo) * n_bins).astype(int), n_bins - 1)
    n = x.size
    mi = 0.0
    for yv in (False, True):
        mask = y == yv
        py = mask.sum() / n
        if py == 0:
            continue
        counts = np.bincount(bins[mask], minlength=n_bins)
        pb_all = np.bincount(bins, minlength=n_bins) / n
        for b in range(n_bins):
            pby = counts[b] / n
            if pby > 0:
                mi += pby * math.log(pby / (pb_all[b] * py))
    return float(max(0.0, mi))


def fit_prep(
    frame: TimeSeriesFrame,
    labels: np.ndarray,
    config: PrepConfig = PrepConfig(),
) -> PrepPlan:
    """Fit the full preprocessing plan on labeled training data.

    Order: clean -> shape classification -> transform assignment -> variance
    gate -> ANOVA-F/MI scoring -> top-k union selection -> collinearity prune.
    """
    labels = np.asarray(labels, dtype=bool)
    cleaned, info = clean(frame)
    transforms: dict[str, ColumnTransform] = {}
    transformed_cols: dict[str, np.ndarray] = {}
    for j, ch in enumerate(cleaned.channels):
        col = cleaned.values[:, j]
        shape = classify_distribution(col, config)
        clip = None
        lam = None
        work = col
        if shape == HEAVILY_SKEWED:
            clip = winsorize_fit(work, config.winsor_lo, config.winsor_hi)
            work = np.clip(work, clip[0], clip[1])
        if shape in (MODERATELY_SKEWED, HEAVILY_SKEWED) and np.var(work) > 0:
            lam = fit_yeo_johnson(work)
            work = yeo_johnson(lam, work)
        transforms[ch] = ColumnTransform(info["medians"][ch], clip, lam)
        transformed_cols[ch] = np.asarray(work, dtype=float)

    # variance gate
    surviving = [ch for ch in cleaned.channels
                 if np.var(transformed_cols[ch]) >= config.variance_floor]

    # relevance scoring
    scores: dict[str, tuple[float, float]] = {}
    for ch in surviving:
        f = anova_f(transformed_cols[ch], labels)
        mi = mutual_info(transformed_cols[ch], labels, config.mi_bins)
        scores[ch] = (f, mi)

    def top_k(key_idx: int) -> set[str]:
        ranked = sorted(surviving, key=lambda ch: (-scores[ch][key_idx], ch))
        return set(ranked[: config.top_k])

    selected = [ch for ch in surviving if ch in (top_k(0) | top_k(1))]

    # collinearity prune: greedy over pairs with |pearson| above threshold
    collinear_dropped: list[str] = []
    kept = list(selected)
    changed = True
    while changed:
        changed = False
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                a, b = kept[i], kept[j]
                xa, xb = transformed_cols[a], transformed_cols[b]
                sa, sb = np.std(xa), np.std(xb)
                if sa == 0 or sb == 0:
                    rho = 1.0 if sa == sb else 0.0
                else:
                    rho = float(np.corrcoef(xa, xb)[0, 1])
                if abs(rho) > config.corr_threshold:
                    # drop lower MI, then lower F, then lexicographically later name
                    fa, ma = scores[a]
                    fb, mb = scores[b]
                    if (ma, fa, b) < (mb, fb, a):
                        victim = a
                    else:
                        victim = b
                    kept.remove(victim)
                    collinear_dropped.append(victim)
                    changed = True
                    break
            if changed:
                break
    if len(kept) < 2:
        raise PrepError("fewer than 2 channels survive preprocessing")
    return PrepPlan(
        dropped_null_channels=info["dropped_null_channels"],
        transforms=transforms,
        selected_channels=kept,
        relevance_scores=scores,
        collinearity_dropped=collinear_dropped,
    )


def apply_prep(plan: PrepPlan, frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Replay a fitted plan on new data with no refitting."""
    missing = [ch for ch in plan.selected_channels if ch not in frame.channels]
    if missing:
        raise PrepError(f"frame missing selected channels: {missing}")
    cols = []
    for ch in plan.selected_channels:
        j = frame.channels.index(ch)
        cols.append(plan.transforms[ch].apply(frame.values[:, j]))
    return TimeSeriesFrame(
        frame.timestamps, list(plan.selected_channels), np.column_stack(cols), frame.labels
    )
