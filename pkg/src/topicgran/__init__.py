"""Calibrating citation-network clustering granularity against a synthesis-article baseline."""

__version__ = "0.1.0"
