"""Spectral solvers and certification suite for the 2D primitive equations on
a strip and their hydrostatic limit."""

__version__ = "0.1.0"
