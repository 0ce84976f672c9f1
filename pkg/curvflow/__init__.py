"""Anisotropic expanding curvature flows on S^1 and S^2 and the Minkowski-type problems they solve."""

__version__ = "0.1.0"
