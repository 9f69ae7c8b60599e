"""Kinetic wealth-exchange simulation and scale-invariance analysis."""

__version__ = "0.1.0"
