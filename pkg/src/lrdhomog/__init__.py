"""Numerical laboratory for elliptic homogenization with long-range-dependent random potentials."""

__version__ = "0.1.0"
