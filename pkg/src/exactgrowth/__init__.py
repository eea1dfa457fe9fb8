"""Numerical toolkit for exact-growth Adams / Trudinger-Moser inequalities on
weighted radial Sobolev spaces.

Submodules
----------
radial_core        geometric grids, weighted measures and radial functions
special_constants  Gamma, exp_p, sharp exponent constants, Hardy constants
symmetrize         half-weighted rearrangement and its maximal function
operators          the weighted radial operator, its powers and inverses
functionals        exact-growth, subcritical and full-norm functionals
extremal           concentrating test sequences and divergence-rate sweeps
ode_app            fourth-order radial problem: inverse, solvers, checks
cli                command-line front end
"""

from exactgrowth.radial_core import (
    RadialFunction,
    RadialGrid,
    SpaceParams,
    WeightedMeasure,
    make_geometric_grid,
    weighted_integral,
    weighted_lp_norm,
)
from exactgrowth.special_constants import beta_0k, exp_p, gamma_fn

__all__ = [
    "RadialFunction",
    "RadialGrid",
    "SpaceParams",
    "WeightedMeasure",
    "make_geometric_grid",
    "weighted_integral",
    "weighted_lp_norm",
    "beta_0k",
    "exp_p",
    "gamma_fn",
]

__version__ = "0.1.0"
