"""Frequency-band spectral alignment for cross-subject time-series classification."""

__version__ = "0.1.0"
