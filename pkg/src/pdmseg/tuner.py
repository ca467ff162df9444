"""Deterministic parallel grid search over change-detector parameters.

Each grid cell is scored by detection F1 against labeled normal->anomalous
transitions and by a windowed-peak signal-to-noise "change score" metric.
Worker count never affects the leaderboard: cells are pure functions of their
inputs and the final sort is canonical.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .changefinder import (
    ChangeFinderConfig,
    ScoreSeries,
    detect_change_points,
    score_multichannel,
)
from .data_io import TimeSeriesFrame


class TunerError(ValueError):
    pass


@dataclass(frozen=True)
class ParamGrid:
    r_values: list[float]
    order_values: list[int]
    smooth_values: list[int]
    threshold_values: list[float]

    def __post_init__(self):
        for name in ("r_values", "order_values", "smooth_values", "threshold_values"):
            if not getattr(self, name):
                raise TunerError(f"{name} must be non-empty")

    def cells(self) -> list[ChangeFinderConfig]:
        return [
            ChangeFinderConfig(r=r, order=o, smooth=s, threshold=t)
            for r, o, s, t in itertools.product(
                self.r_values, self.order_values, self.smooth_values, self.threshold_values
            )
        ]


@dataclass(frozen=True)
class TransitionSet:
    """Sample indices where the label flips from normal (True) to anomalous (False)."""

    indices: list[int]

    def __post_init__(self):
        idx = list(self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise TunerError("transition indices must be strictly increasing")


@dataclass(frozen=True)
class LeaderboardRow:
    config: ChangeFinderConfig
    f1: float
    cs: float
    n_change_points: int
    error: Optional[str] = None


@dataclass(frozen=True)
class Leaderboard:
    objective: str
    rows: list[LeaderboardRow] = field(default_factory=list)

    @property
    def best(self) -> LeaderboardRow:
        return self.rows[0]


def transitions_from_labels(labels: np.ndarray) -> TransitionSet:
    lab = np.asarray(labels, dtype=bool)
    idx = [int(t) for t in range(1, lab.shape[0]) if lab[t - 1] and not lab[t]]
    return TransitionSet(idx)


def detection_f1(
    predicted: list[int], truth: TransitionSet, tolerance: int
) -> tuple[float, float, float]:
    """Greedy one-to-one matching within the tolerance; returns (P, R, F1)."""
    if tolerance < 0:
        raise TunerError("tolerance must be >= 0")
    pairs = []
    for ti, t in enumerate(truth.indices):
        for pi, p in enumerate(predicted):
            d = abs(p - t)
            if d <= tolerance:
                pairs.append((d, ti, pi))
    pairs.sort()
    used_t, used_p = set(), set()
    tp = 0
    for _, ti, pi in pairs:
        if ti in used_t or pi in used_p:
            continue
        used_t.add(ti)
        used_p.add(pi)
        tp += 1
    fp = len(predicted) - tp
    fn = len(truth.indices) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def change_score_metric(
    scores: ScoreSeries, truth: TransitionSet, tolerance: int
) -> float:
    """Peak signal-to-noise of the change score at the true transitions.

    Mean of the per-truth window maxima minus the mean score outside all
    windows, divided by the outside standard deviation.
    """
    if not truth.indices:
        raise TunerError("CS undefined: no true transitions")
    s = scores.change_score
    n = s.shape[0]
    inside = np.zeros(n, dtype=bool)
    peaks = []
    for t in truth.indices:
        lo, hi = max(0, t - tolerance), min(n, t + tolerance + 1)
        if hi > lo:
            inside[lo:hi] = True
            peaks.append(float(np.max(s[lo:hi])))
    outside = s[~inside]
    if outside.size == 0 or not peaks:
        return 0.0
    return float(
        (np.mean(peaks) - np.mean(outside)) / (np.std(outside) + 1e-12)
    )


def _evaluate_cell(
    frame: TimeSeriesFrame,
    truth: TransitionSet,
    config: ChangeFinderConfig,
    tolerance: Optional[int],
) -> LeaderboardRow:
    tol = 2 * config.smooth if tolerance is None else tolerance
    try:
        scores = score_multichannel(frame, config)
        seg = detect_change_points(
            scores, config.threshold, config.effective_min_gap, config.absolute_threshold
        )
        _, _, f1 = detection_f1(seg.change_points, truth, tol)
        cs = change_score_metric(scores, truth, tol)
        return LeaderboardRow(config, f1, cs, len(seg.change_points))
    except Exception as exc:  # failed cells score -inf rather than aborting
        return LeaderboardRow(config, -math.inf, -math.inf, 0, error=str(exc))


def grid_search(
    frame: TimeSeriesFrame,
    labels: np.ndarray,
    grid: ParamGrid,
    objective: str = "f1",
    tolerance: Optional[int] = None,
    threads: int = 1,
) -> Leaderboard:
    """Evaluate every grid cell; result is independent of thread count."""
    if objective not in ("f1", "cs"):
        raise TunerError("objective must be 'f1' or 'cs'")
    truth = transitions_from_labels(labels)
    if not truth.indices:
        raise TunerError("labels contain no normal->anomalous transition")
    cells = grid.cells()
    if threads <= 1:
        rows = [_evaluate_cell(frame, truth, c, tolerance) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: _evaluate_cell(frame, truth, c, tolerance), cells))
    key = (lambda r: (-r.f1, r.config.r, r.config.order, r.config.smooth, r.config.threshold)) \
        if objective == "f1" else \
        (lambda r: (-r.cs, r.config.r, r.config.order, r.config.smooth, r.config.threshold))
    rows.sort(key=key)
    return Leaderboard(objective, rows)


def leaderboard_csv(board: Leaderboard) -> str:
    lines = ["r,order,smooth,threshold,f1,cs,n_change_points"]
    for row in board.rows:
        c = row.config
        lines.append(
            f"{c.r},{c.order},{c.smooth},{c.threshold},{row.f1},{row.cs},{row.n_change_points}"
        )
    return "\n".join(lines) + "\n"
