"""Simulation and analysis tools for phase-referenced twin-field QKD."""

__version__ = "0.1.0"
