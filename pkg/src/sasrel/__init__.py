"""Sparse-subspace assisted reliability analysis."""

__version__ = "0.1.0"
