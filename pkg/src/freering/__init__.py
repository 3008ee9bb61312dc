"""Numerical free convolution, Single Ring laws and random-matrix checks."""

__version__ = "0.1.0"
