"""Driven-dissipative arrays of two-level emitters."""

__version__ = "0.1.0"
