"""Geometric-phase spin squeezing: Dicke-model construction, open-system
dynamics, squeezing metrics, and parameter sweeps."""

__version__ = "0.1.0"
