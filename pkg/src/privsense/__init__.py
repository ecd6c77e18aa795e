"""Simulation and numerical auditing of private networked quantum sensing."""

__version__ = "0.1.0"
