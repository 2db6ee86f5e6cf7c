"""Eigenvalue variation of half-flux Aharonov-Bohm operators under pole motion."""

__version__ = "0.1.0"
