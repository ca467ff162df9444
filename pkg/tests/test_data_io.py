"""Loader strictness, CSV round-trips, and synthetic generator contracts."""

from __future__ import annotations

import numpy as np
import pytest

from pdmseg import data_io
from pdmseg.data_io import (
    DataFormatError,
    NocIntervals,
    SynthConfig,
    TimeSeriesFrame,
)


def _tiny_frame(labels=None):
    ts = np.array([0.0, 60.0, 120.0])
    vals = np.array([[1.0, 2.0], [3.0, np.nan], [5.0, 6.0]])
    return TimeSeriesFrame(ts, ["a", "b"], vals, labels)


class TestFrameValidation:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataFormatError):
            TimeSeriesFrame(np.array([0.0, 1.0]), ["a"], np.zeros((3, 1)))

    def test_duplicate_channels_rejected(self):
        with pytest.raises(DataFormatError):
            TimeSeriesFrame(np.array([0.0, 1.0]), ["a", "a"], np.zeros((2, 2)))

    def test_non_monotonic_timestamps_rejected(self):
        with pytest.raises(DataFormatError):
            TimeSeriesFrame(np.array([0.0, 2.0, 1.0]), ["a"], np.zeros((3, 1)))

    def test_label_length_checked(self):
        with pytest.raises(DataFormatError):
            _tiny_frame(labels=np.array([True, False]))


class TestNocIntervals:
    def test_sorted_and_disjoint_enforced(self):
        noc = NocIntervals([(10.0, 20.0), (0.0, 5.0)])
        assert noc.intervals == [(0.0, 5.0), (10.0, 20.0)]
        with pytest.raises(DataFormatError):
            NocIntervals([(0.0, 10.0), (5.0, 20.0)])
        with pytest.raises(DataFormatError):
            NocIntervals([(5.0, 5.0)])

    def test_label_from_noc_closed_bounds(self):
        frame = _tiny_frame()
        labeled = data_io.label_from_noc(frame, NocIntervals([(0.0, 60.0)]))
        assert labeled.labels.tolist() == [True, True, False]


class TestCsvRoundTrip:
    def test_values_lossless(self, tmp_path):
        frame = _tiny_frame(labels=np.array([True, False, True]))
        path = str(tmp_path / "data.csv")
        data_io.write_csv(frame, path)
        back = data_io.load_csv(path)
        assert back.channels == frame.channels
        np.testing.assert_array_equal(back.timestamps, frame.timestamps)
        np.testing.assert_array_equal(back.values, frame.values)  # NaN-safe equal
        assert back.labels.tolist() == frame.labels.tolist()

    def test_iso_timestamps_parse(self, tmp_path):
        path = tmp_path / "iso.csv"
        path.write_text("timestamp,a\n2024-01-01T00:00:00Z,1.0\n2024-01-01T00:01:00Z,2.0\n")
        frame = data_io.load_csv(str(path))
        assert frame.timestamps[1] - frame.timestamps[0] == 60.0

    def test_single_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("timestamp\n1\n2\n")
        with pytest.raises(DataFormatError):
            data_io.load_csv(str(path))

    def test_noc_round_trip(self, tmp_path):
        noc = NocIntervals([(0.0, 100.5), (200.0, 300.25)])
        path = str(tmp_path / "noc.csv")
        data_io.write_noc(noc, path)
        assert data_io.load_noc(path).intervals == noc.intervals

    def test_change_point_round_trip(self, tmp_path):
        path = str(tmp_path / "cps.txt")
        data_io.write_change_points([5, 99, 1000], path)
        assert data_io.load_change_points(path) == [5, 99, 1000]


class TestSynthConfigValidation:
    def test_bad_fraction_rejected(self):
        with pytest.raises(ValueError):
            SynthConfig(anomaly_fraction=0.6)

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValueError):
            SynthConfig(noise_sigma=0.0)


class TestGenerator:
    CFG = SynthConfig(n_samples=8000, n_channels=5, n_regime_shifts=6,
                      anomaly_fraction=0.02, seed=11)

    def test_deterministic_per_seed(self):
        f1, n1, c1 = data_io.generate_synthetic(self.CFG)
        f2, n2, c2 = data_io.generate_synthetic(self.CFG)
        np.testing.assert_array_equal(f1.values, f2.values)
        assert n1.intervals == n2.intervals
        assert c1 == c2

    def test_seed_changes_data(self):
        f1, _, _ = data_io.generate_synthetic(self.CFG)
        f2, _, _ = data_io.generate_synthetic(
            SynthConfig(**{**self.CFG.__dict__, "seed": 12})
        )
        assert not np.array_equal(f1.values, f2.values)

    def test_anomaly_budget_and_labels(self):
        frame, noc, cps = data_io.generate_synthetic(self.CFG)
        n_anom = int((~frame.labels).sum())
        assert n_anom == round(self.CFG.anomaly_fraction * self.CFG.n_samples)
        # NoC intervals are exactly the complement of the anomalous samples
        relabeled = data_io.label_from_noc(frame, noc)
        assert relabeled.labels.tolist() == frame.labels.tolist()

    def test_change_points_sorted_interior(self):
        _, _, cps = data_io.generate_synthetic(self.CFG)
        assert cps == sorted(cps)
        assert len(cps) == self.CFG.n_regime_shifts
        assert all(0 < p < self.CFG.n_samples for p in cps)

    def test_anomalies_anchor_at_change_points(self):
        frame, _, cps = data_io.generate_synthetic(self.CFG)
        anomalous = ~frame.labels
        onsets = [t for t in range(1, frame.n_samples)
                  if anomalous[t] and not anomalous[t - 1]]
        assert onsets and all(t in cps for t in onsets)

    def test_levels_positive(self):
        frame, _, _ = data_io.generate_synthetic(self.CFG)
        assert np.nanmedian(frame.values) > 0

    def test_too_many_shifts_rejected(self):
        with pytest.raises(ValueError):
            data_io.generate_synthetic(SynthConfig(n_samples=20, n_regime_shifts=15))
