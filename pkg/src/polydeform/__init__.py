"""Polycube deformation by iterated rotation-driven Poisson solves."""

__version__ = "0.1.0"
