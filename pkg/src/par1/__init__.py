"""Simulation and least squares estimation for explosive periodic AR(1) series."""

__version__ = "0.1.0"
