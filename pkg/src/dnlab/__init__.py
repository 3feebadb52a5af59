"""Simulation and verification tools for distributed accelerated gradient methods."""

__version__ = "0.1.0"
