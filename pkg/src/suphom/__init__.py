"""Numerical homogenization of supremal functionals.

Two routes to the homogenized density ``f_hom(Z)`` of a periodic supremal
integrand: the Lp cell problems with ``p`` growing (:mod:`suphom.lp_hom`)
and direct level bisection on a periodic feasibility problem
(:mod:`suphom.sup_hom`). Pointwise gradient constraints are homogenized in
:mod:`suphom.constraint_hom`; exact reference values live in
:mod:`suphom.oracle`.
"""

from .constraint_hom import (ConstraintMap, EffectiveSet, EffectiveSetOptions, check_midpoint_convexity,
                             cross_check_sublevel, default_directions, effective_set, indicator_feasible,
                             validate_H3_H4)
from .density import PeriodicDensity, SublevelSet, check_growth, check_level_convexity, psi
from .errors import (ConfigError, InfeasibleLevelError, NotLevelConvexError, SolverError, SuphomError,
                     UnsupportedOperationError)
from .feasibility import FeasibilityOptions, FeasibilityResult
from .grid import CellGrid
from .lp_hom import LpHomEstimate, LpOptions, macro_sup_limit, p_sweep, solve_lp_cell
from .oracle import Oracle1D, lp_hom_1d_closed_form, sup_hom_1d, sup_hom_laminate_2d
from .sup_hom import SupHomEstimate, SupOptions, feasibility, multi_cell_compare, solve_sup_cell

__version__ = "0.1.0"
