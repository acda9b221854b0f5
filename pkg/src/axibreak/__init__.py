"""Minimisers of the coupled Schrodinger-Ampere thermodynamic potential on the unit disk."""

__version__ = "0.1.0"

from .critical import find_bstar, fit_bstar
from .fields import (
    Params,
    PolarGrid,
    RadialGrid,
    State2D,
    constraint_project,
    density_mean,
    el_residuals,
    energy_total,
)
from .radial import SymmetricState, landau_mu, solve_symmetric, symmetric_energy_scan
from .reduced import ReducedPoint, reduced_constraint, reduced_energy, reduced_minimize
from .solver2d import Seed2D, minimize_2d, nodal_radius, phase_winding
from .sweep import SweepRow, locate_bifurcation, sweep

__all__ = [
    "Params", "PolarGrid", "RadialGrid", "State2D", "SymmetricState", "ReducedPoint", "Seed2D", "SweepRow",
    "energy_total", "density_mean", "el_residuals", "constraint_project",
    "solve_symmetric", "landau_mu", "symmetric_energy_scan",
    "reduced_energy", "reduced_constraint", "reduced_minimize",
    "minimize_2d", "nodal_radius", "phase_winding",
    "find_bstar", "fit_bstar", "sweep", "locate_bifurcation",
]
