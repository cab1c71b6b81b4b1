"""Simulation laboratory for the matroid secretary problem."""

__version__ = "0.1.0"
