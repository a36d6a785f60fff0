"""Planar Neumann Green's functions by boundary integral equations.

Modules
-------
geometry    curves, panelizations and point queries
quadrature  Gauss-Legendre rules and log-singular corrections
bie         second-kind integral equations for the four variants
greens      regular parts, derivatives and Green's matrices
oracles     disk closed forms and ellipse series
capture     discrete energy, GMFPT, trap optimization and orientation
signaling   exterior splitting probabilities and the Cassini study
cli         batch driver
"""

from .geometry import build_curve, panelize, ParametricCurve, Panelization
from .bie import GreensProblem, DensitySolution, solve_density
from .greens import solve, regular_part, gradient, hessian, greens_value, build_greens_matrix
from .capture import TrapConfiguration, discrete_energy, optimize_traps, orientation
from .signaling import solve_splitting, splitting_field, cassini_xi

__all__ = [
    "build_curve", "panelize", "ParametricCurve", "Panelization",
    "GreensProblem", "DensitySolution", "solve_density",
    "solve", "regular_part", "gradient", "hessian", "greens_value", "build_greens_matrix",
    "TrapConfiguration", "discrete_energy", "optimize_traps", "orientation",
    "solve_splitting", "splitting_field", "cassini_xi",
]

__version__ = "0.1.0"
