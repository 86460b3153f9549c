"""Numerical P-type decompositions for holonomy reductions of Cartan geometries."""

__version__ = "0.1.0"
