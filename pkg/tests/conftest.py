"""Shared fixtures: small seeded datasets reused across the test modules."""

from __future__ import annotations

import numpy as np
import pytest

from pdmseg import data_io


@pytest.fixture(scope="session")
def small_synth():
    """A fast 6000-sample, 4-channel synthetic instance with its NoC intervals."""
    cfg = data_io.SynthConfig(
        n_samples=6000, n_channels=4, n_regime_shifts=5, anomaly_fraction=0.03, seed=7
    )
    frame, noc, cps = data_io.generate_synthetic(cfg)
    return frame, noc, cps


@pytest.fixture
def labeled_frame():
    """Tiny hand-built labeled frame for windowing and prep tests."""
    rng = np.random.default_rng(0)
    n = 300
    values = rng.normal(50.0, 1.0, size=(n, 3))
    values[200:240] += 4.0
    labels = np.ones(n, dtype=bool)
    labels[200:240] = False
    ts = 1_700_000_000.0 + 60.0 * np.arange(n)
    return data_io.TimeSeriesFrame(ts, ["a", "b", "c"], values, labels)
