"""Spectral simulation and verification toolkit for the focusing inhomogeneous NLS."""

__version__ = "0.1.0"
