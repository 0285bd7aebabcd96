"""Numerical ADHM instantons on quaternionic projective space."""

__version__ = "0.1.0"
