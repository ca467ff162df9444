"""Sensor CSV / NoC-interval ingestion and the seeded synthetic generator.

The real turbine data is proprietary; a regime-switching synthetic generator
stands in for it.  All loaders are strict about the documented file formats:
header row, first column timestamp (epoch seconds or ISO-8601), numeric
channels, empty cell = missing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

# length of the smooth level transition used for benign regime shifts
RAMP_SAMPLES = 150


class DataFormatError(ValueError):
    """Raised when an input file violates the documented format."""


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Timestamped multichannel sensor matrix with optional normal/anomalous labels.

    ``labels[i] is True`` means sample i is normal.  Missing values are NaN.
    """

    timestamps: np.ndarray          # float64 epoch seconds, strictly increasing
    channels: list[str]
    values: np.ndarray              # [n_samples, n_channels]
    labels: Optional[np.ndarray] = None   # bool per sample, True = normal

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] != ts.shape[0]:
            raise DataFormatError("values row count must match timestamps")
        if vals.shape[1] != len(self.channels):
            raise DataFormatError("values column count must match channels")
        if len(set(self.channels)) != len(self.channels):
            raise DataFormatError("duplicate channel names")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise DataFormatError("non-monotonic timestamps")
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=bool)
            object.__setattr__(self, "labels", lab)
            if lab.shape[0] != ts.shape[0]:
                raise DataFormatError("labels length must match timestamps")

    @property
    def n_samples(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def with_labels(self, labels: np.ndarray) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.timestamps, list(self.channels), self.values, labels)


@dataclass(frozen=True)
class NocIntervals:
    """Closed [start, end] intervals of known-normal operation, sorted, disjoint."""

    intervals: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        ivs = [(float(a), float(b)) for a, b in self.intervals]
        for a, b in ivs:
            if b <= a:
                raise DataFormatError(f"interval end {b} <= start {a}")
        ivs.sort(key=lambda iv: iv[0])
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            if a1 <= b0:
                raise DataFormatError(f"overlapping intervals ({a0},{b0}) and ({a1},{b1})")
        object.__setattr__(self, "intervals", ivs)


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 50_000
    n_channels: int = 10
    n_regime_shifts: int = 12
    anomaly_fraction: float = 0.0156
    noise_sigma: float = 1.0
    shift_magnitude_sigma: float = 5.0
    seed: int = 0
    cadence_seconds: float = 60.0
    ar_coeff: float = 0.7
    # optional per-regime noise scale heterogeneity (uniform on this range)
    regime_noise_range: tuple[float, float] = (1.0, 1.0)
    # anomaly signature inside each interval: mildly inflated noise, a slow
    # drift, and sustained instability -- every `anomaly_jump_every` samples
    # most channels take a small coincident level jump that reverts when the
    # interval ends.  Each jump is weak per channel but synchronized across
    # channels, which is what segment-level scoring can aggregate and single
    # raw windows cannot.
    anomaly_noise_factor: float = 1.05
    anomaly_drift_sigma: float = 0.3
    anomaly_jump_sigma: float = 1.5
    anomaly_jump_every: int = 10

    def __post_init__(self):
        if self.n_samples < 1 or self.n_channels < 1:
            raise ValueError("counts must be >= 1")
        if not (0.0 <= self.anomaly_fraction < 0.5):
            raise ValueError("anomaly_fraction must be in [0, 0.5)")
        if self.noise_sigma <= 0 or self.shift_magnitude_sigma < 0:
            raise ValueError("sigmas must be positive")
        if self.n_regime_shifts < 0:
            raise ValueError("n_regime_shifts must be >= 0")


def _parse_timestamps(col: pd.Series) -> np.ndarray:
    numeric = pd.to_numeric(col, errors="coerce")
    if not numeric.isna().any():
        return numeric.to_numpy(dtype=float)
    parsed = pd.to_datetime(col, utc=True, format="ISO8601", errors="coerce")
    if parsed.isna().any():
        raise DataFormatError("timestamp column not parseable as epoch seconds or ISO-8601")
    return parsed.astype("int64").to_numpy() / 1e9


def load_csv(path: str, timestamp_column: str | None = None) -> TimeSeriesFrame:
    """Load a sensor CSV.  Columns other than the timestamp become channels."""
    try:
        df = pd.read_csv(path, comment="#")
    except OSError as exc:
        raise DataFormatError(f"unreadable file {path}: {exc}") from exc
    if df.shape[1] < 2:
        raise DataFormatError("need a timestamp column plus at least one channel")
    ts_col = timestamp_column if timestamp_column is not None else df.columns[0]
    if ts_col not in df.columns:
        raise DataFormatError(f"timestamp column {ts_col!r} not in header")
    ts = _parse_timestamps(df[ts_col])
    chan_cols = [c for c in df.columns if c != ts_col]
    labels = None
    if "label_normal" in chan_cols:
        chan_cols.remove("label_normal")
        labels = df["label_normal"].to_numpy(dtype=float) > 0.5
    values = np.column_stack(
        [pd.to_numeric(df[c], errors="coerce").to_numpy(dtype=float) for c in chan_cols]
    ) if chan_cols else np.empty((len(df), 0))
    return TimeSeriesFrame(ts, chan_cols, values, labels)


def write_csv(frame: TimeSeriesFrame, path: str) -> None:
    """Write a frame in the loadable CSV format, lossless for float64 values."""
    with open(path, "w", encoding="utf-8") as fh:
        cols = ["timestamp"] + list(frame.channels)
        if frame.labels is not None:
            cols.append("label_normal")
        fh.write(",".join(cols) + "\n")
        for i in range(frame.n_samples):
            row = [repr(float(frame.timestamps[i]))]
            for v in frame.values[i]:
                row.append("" if np.isnan(v) else repr(float(v)))
            if frame.labels is not None:
                row.append("1" if frame.labels[i] else "0")
            fh.write(",".join(row) + "\n")


def load_noc(path: str) -> NocIntervals:
    """Load a two-column (start, end) NoC interval CSV."""
    try:
        df = pd.read_csv(path, comment="#")
    except pd.errors.EmptyDataError:
        return NocIntervals([])
    except OSError as exc:
        raise DataFormatError(f"unreadable file {path}: {exc}") from exc
    if df.shape[1] < 2:
        raise DataFormatError("NoC file needs start and end columns")
    if len(df) == 0:
        return NocIntervals([])
    starts = _parse_timestamps(df.iloc[:, 0])
    ends = _parse_timestamps(df.iloc[:, 1])
    return NocIntervals(list(zip(starts, ends)))


def write_noc(noc: NocIntervals, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("start,end\n")
        for a, b in noc.intervals:
            fh.write(f"{repr(float(a))},{repr(float(b))}\n")


def label_from_noc(frame: TimeSeriesFrame, noc: NocIntervals) -> TimeSeriesFrame:
    """Label samples normal iff their timestamp falls inside a closed NoC interval."""
    labels = np.zeros(frame.n_samples, dtype=bool)
    for a, b in noc.intervals:
        labels |= (frame.timestamps >= a) & (frame.timestamps <= b)
    return frame.with_labels(labels)


def _shift_positions(n: int, n_shifts: int, rng: np.random.Generator) -> list[int]:
    # stratified placement with jitter: one shift per equal chunk of the axis,
    # guaranteeing spread so temporal splits see shifts on both sides
    if n_shifts == 0:
        return []
    chunk = n // (n_shifts + 1)
    if chunk < 2:
        raise ValueError("too many regime shifts for series length")
    jitter = max(1, chunk // 4)
    pos = []
    for i in range(n_shifts):
        base = (i + 1) * chunk
        p = int(base + rng.integers(-jitter, jitter + 1))
        pos.append(min(max(p, 1), n - 2))
    pos = sorted(set(pos))
    if len(pos) != n_shifts:
        raise ValueError("regime shift positions collide; reduce n_regime_shifts")
    return pos


def generate_synthetic(
    config: SynthConfig,
) -> tuple[TimeSeriesFrame, NocIntervals, list[int]]:
    """Seeded regime-switching AR(1) generator.

    Channels follow AR(1) dynamics around positive piecewise operating levels;
    at each regime shift a random subset of channels moves to a fresh offset
    of magnitude ~``shift_magnitude_sigma * noise_sigma`` around its baseline.
    Benign shifts transition smoothly; the shifts that anchor anomaly
    intervals step abruptly.  Contiguous anomaly intervals (total length
    ~``anomaly_fraction``) each start at a regime shift and carry inflated
    noise, a slow drift, and repeated small coincident level jumps.  NoC
    intervals are the complement of the anomaly intervals.  Bit-deterministic
    for a given seed.
    """
    n, d = config.n_samples, config.n_channels
    rng = np.random.default_rng(config.seed)
    shifts = _shift_positions(n, config.n_regime_shifts, rng)

    # anomaly intervals are anchored at a spread-out subset of the shifts
    total_anom = int(round(config.anomaly_fraction * n))
    anchors: list[int] = []
    if total_anom > 0 and shifts:
        n_anom = min(8, len(shifts))
        anchors = sorted({shifts[int(round(j * (len(shifts) - 1) / max(1, n_anom - 1)))]
                          for j in range(n_anom)})
    anomalous = np.zeros(n, dtype=bool)
    if anchors:
        length = total_anom // len(anchors)
        rem = total_anom - length * len(anchors)
        prev_end = -1
        for j, s in enumerate(anchors):
            ln = length + (rem if j == 0 else 0)
            end = s + ln
            if end > n or s <= prev_end:
                raise ValueError("anomaly intervals overlap or exceed series length")
            anomalous[s:end] = True
            prev_end = end
    anchor_set = set(anchors)

    # per-channel levels: anomaly-anchoring shifts are abrupt steps, the other
    # shifts are smooth operating-point ramps the machinery passes through
    levels = np.zeros((n, d))
    # positive operating baselines, well clear of zero, like physical sensors
    base = rng.uniform(40.0, 80.0, size=d)
    levels[:] = base
    step_mag = config.shift_magnitude_sigma * config.noise_sigma
    for s in shifts:
        affected = rng.random(d) < 0.5
        if not affected.any():
            affected[int(rng.integers(d))] = True
        # affected channels move to a fresh offset around their base level, so
        # levels stay bounded instead of random-walking out of the training range
        signs = rng.choice([-1.0, 1.0], size=d)
        target = base + signs * step_mag * rng.uniform(0.5, 1.0, size=d)
        new = np.where(affected, target, levels[s])
        if s in anchor_set:
            levels[s:] = new
        else:
            ramp_len = min(RAMP_SAMPLES, n - s)
            w = np.linspace(0.0, 1.0, ramp_len)
            levels[s:s + ramp_len] = levels[s] * (1.0 - w[:, None]) + new * w[:, None]
            levels[s + ramp_len:] = new

    # heterogeneous regimes: each stretch between shifts gets its own noise scale
    lo, hi = config.regime_noise_range
    regime_scale = rng.uniform(lo, hi, size=len(shifts) + 1)
    regime_idx = np.searchsorted(np.asarray(shifts, dtype=int), np.arange(n), side="right")
    local_scale = regime_scale[regime_idx]

    # AR(1) noise with inflated innovations, drift, and micro-jumps inside anomalies
    eps = rng.normal(size=(n, d))
    sigma = (
        np.where(anomalous, config.anomaly_noise_factor, 1.0)
        * local_scale
        * config.noise_sigma
    )[:, None]
    drift = np.zeros((n, d))
    if anomalous.any():
        bounds = np.flatnonzero(np.diff(anomalous.astype(int)))
        starts = [b + 1 for b in bounds if anomalous[b + 1]]
        ends = [b + 1 for b in bounds if not anomalous[b + 1]]
        if anomalous[0]:
            starts = [0] + starts
        if anomalous[-1]:
            ends = ends + [n]
        for s, e in zip(starts, ends):
            scale = float(local_scale[s]) * config.noise_sigma
            direction = rng.choice([-1.0, 1.0], size=d) * (rng.random(d) < 0.7)
            ramp = np.linspace(0.0, 1.0, e - s)
            drift[s:e] = ramp[:, None] * direction * config.anomaly_drift_sigma * scale
            jump_mag = config.anomaly_jump_sigma * config.noise_sigma
            for k in range(s + config.anomaly_jump_every, e, config.anomaly_jump_every):
                subset = rng.random(d) < 0.8
                if not subset.any():
                    subset[int(rng.integers(d))] = True
                jump = rng.choice([-1.0, 1.0], size=d) * jump_mag
                drift[k:e] += np.where(subset, jump, 0.0)
    phi = config.ar_coeff
    ar = np.zeros((n, d))
    prev = np.zeros(d)
    for t in range(n):
        prev = phi * prev + sigma[t] * eps[t]
        ar[t] = prev
    values = levels + ar + drift

    t0 = 1_700_000_000.0
    timestamps = t0 + config.cadence_seconds * np.arange(n)
    labels = ~anomalous
    frame = TimeSeriesFrame(timestamps, [f"ch{i:02d}" for i in range(d)], values, labels)

    # NoC = complement of anomaly intervals, as closed timestamp intervals
    noc_ivs = []
    i = 0
    while i < n:
        if labels[i]:
            j = i
            while j + 1 < n and labels[j + 1]:
                j += 1
            noc_ivs.append((float(timestamps[i]), float(timestamps[j])))
            i = j + 1
        else:
            i += 1
    change_points = sorted(shifts)
    return frame, NocIntervals(noc_ivs), change_points


def write_change_points(points: Sequence[int], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in points:
            fh.write(f"{int(p)}\n")


def load_change_points(path: str) -> list[int]:
    with open(path, "r", encoding="utf-8") as fh:
        return [int(line) for line in fh if line.strip()]
