"""Optimal recovery of harmonic fields from interior point measurements."""

__version__ = "0.1.0"
