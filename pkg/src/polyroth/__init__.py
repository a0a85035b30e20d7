"""Numerical machinery for polynomial Roth patterns on the real line."""

__version__ = "0.1.0"
