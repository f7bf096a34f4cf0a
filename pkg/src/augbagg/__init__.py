"""Noise-augmented bagging (AugBagg), its linear-model theory and a variable-importance test."""

__version__ = "0.1.0"
