"""Reconstruction of Gaussian-shape-preserving master-equation coefficients."""

__version__ = "0.1.0"
