"""Exact computations with generalized fractions, Cousin complexes and their variance."""

__version__ = "0.1.0"
