"""Weak-KAM and Wigner-measure numerics on the one-dimensional torus."""

__version__ = "0.1.0"
