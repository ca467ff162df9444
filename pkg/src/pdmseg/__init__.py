"""Segmentation-aware anomaly detection for industrial sensor time series."""

__version__ = "0.1.0"
