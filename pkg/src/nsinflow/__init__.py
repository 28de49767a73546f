"""Radial inflow problem for the isentropic compressible Navier-Stokes equations:
stationary profiles, time evolution, Lagrangian diagnostics and energy functionals."""
from .core import DomainError, Parameters, RadialField, RadialGrid
from .stationary import StationaryProfile, classify_density_profile, decay_report, solve_stationary

__all__ = [
    "DomainError",
    "Parameters",
    "RadialField",
    "RadialGrid",
    "StationaryProfile",
    "classify_density_profile",
    "decay_report",
    "solve_stationary",
]
