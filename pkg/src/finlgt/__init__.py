"""Finite-group lattice gauge theory in four dimensions: exact enumeration,
Monte Carlo and first-order Wilson loop predictions."""

__version__ = "0.1.0"
