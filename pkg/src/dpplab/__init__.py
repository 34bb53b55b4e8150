"""Numerical laboratory for thinned CUE and sine determinantal processes."""

__version__ = "0.1.0"
