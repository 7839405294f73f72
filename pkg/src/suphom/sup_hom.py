"""Direct computation of the homogenized supremal density by level bisection.

For a level-convex density the effective value at ``Z`` is the smallest
level ``M`` for which a periodic corrector keeps ``Z + Du`` inside the
sublevel set ``{f(x, .) <= M}`` at every point of the cell. Each probed
level is a convex feasibility problem (:mod:`suphom.feasibility`).
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .feasibility import FeasibilityOptions, FeasibilityResult, broadcast_matrix, find_corrector
from .grid import CellGrid
from .sets import matrix_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SupOptions:
    """Bisection settings; ``tol_M=None`` means ``1e-4 * (1 + |Z|)``."""

    tol_M: Optional[float] = None
    max_bisect: int = 200
    feas: FeasibilityOptions = FeasibilityOptions()

    def __post_init__(self):
        if self.tol_M is not None and not self.tol_M > 0:
            raise ValueError("tol_M must be positive")
        if self.max_bisect < 1:
            raise ValueError("max_bisect must be positive")

    def level_tolerance(self, Z) -> float:
        if self.tol_M is not None:
            return self.tol_M
        return 1e-4 * (1.0 + float(matrix_norm(np.atleast_2d(np.asarray(Z, dtype=float)))))


@dataclass
class SupHomEstimate:
    Z: np.ndarray
    j: int
    N: int
    value: float
    bracket: tuple
    corrector: Optional[np.ndarray] = field(default=None, repr=False)
    conservative: bool = False
    achieved: float = np.nan
    feas_diagnostics: list = field(default_factory=list, repr=False)
    wall_time: float = field(default=0.0, repr=False, compare=False)

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict:
        return {"Z": np.asarray(self.Z).tolist(), "j": self.j, "N": self.N,
                "value": self.value, "M_lo": self.bracket[0], "M_hi": self.bracket[1],
                "conservative": self.conservative, "achieved": self.achieved,
                "levels": self.feas_diagnostics}


def _as_Z(density, Z) -> np.ndarray:
    return np.asarray(Z, dtype=float).reshape(density.d, density.n)


def feasibility(density, grid: CellGrid, Z, M: float, opts: FeasibilityOptions = FeasibilityOptions(),
                warm: Optional[FeasibilityResult] = None) -> FeasibilityResult:
    """Is there a periodic ``u`` with ``f(x_c, Z + Du_c) <= M`` on every cell?"""
    if M < 0:
        raise ValueError("level M must be nonnegative")
    density.require_solvable()
    return find_corrector(density.cell_sublevels(grid, M), grid, _as_Z(density, Z), opts, warm)


def solve_sup_cell(density, grid: CellGrid, Z, opts: SupOptions = SupOptions()) -> SupHomEstimate:
    """Bisection on the level with warm-started feasibility probes.

    The bracket starts at ``[0, max_c f(x_c, Z)]``, where the zero corrector
    is feasible at the upper end. Undecided probes count as infeasible and
    mark the estimate conservative (the value can only be too large).
    """
    density.require_solvable()
    start = time.perf_counter()
    Z = _as_Z(density, Z)
    tol = opts.level_tolerance(Z)
    Zc = broadcast_matrix(Z, grid, density.d, density.n)
    lo, hi = 0.0, density.max_over_cells(grid, Z)
    best_u = np.zeros((density.d,) + grid.shape)
    best_W = Zc.copy()
    conservative = False
    diags = []
    warm = None
    steps = 0
    while hi - lo > tol and steps < opts.max_bisect:
        steps += 1
        M = 0.5 * (lo + hi)
        res = feasibility(density, grid, Z, M, opts.feas, warm)
        diags.append({"M": M, **res.summary()})
        if res.feasible:
            hi = M
            best_u, best_W = res.u, Zc + res.G
        else:
            lo = M
            if res.status == "undecided":
                conservative = True
        if res.G is not None:
            warm = res
    achieved = float(np.max(density.cell_eval(grid, best_W)))
    log.debug("sup cell Z=%s: [%g, %g] after %d probes", Z.ravel(), lo, hi, steps)
    return SupHomEstimate(Z=Z, j=grid.j, N=grid.N, value=hi, bracket=(lo, hi), corrector=best_u,
                          conservative=conservative, achieved=achieved, feas_diagnostics=diags,
                          wall_time=time.perf_counter() - start)


def solve_sup_many(density, grid, Zs, opts: SupOptions = SupOptions(), workers: int = 0) -> list:
    """Independent cell solves over several ``Z``; results keep input order."""
    Zs = list(Zs)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda z: solve_sup_cell(density, grid, z, opts), Zs))
    return [solve_sup_cell(density, grid, z, opts) for z in Zs]


def multi_cell_compare(density, Z, js, N: int, opts: SupOptions = SupOptions()) -> list:
    """Solve on ``jY`` for each ``j`` at the common spacing ``1/N``."""
    out = []
    for j in js:
        if int(j) < 1:
            raise ValueError(f"cell multiplicity must be a positive integer, got {j}")
        out.append(solve_sup_cell(density, CellGrid(density.n, int(j), N), Z, opts))
    return out


def level_root_along_ray(density, grid, direction, level: float,
                         opts: SupOptions = SupOptions(), xtol: float = 1e-5) -> float:
    """Largest ``t >= 0`` with ``f_hom(t e) <= level``, by root finding on ``t``.

    The bracket comes from the two elementary bounds: the zero corrector
    (``f_hom <= max_c f(x_c, .)``) and coercivity (``f_hom >= alpha |.|``).
    Brent's method then needs only a few cell solves per ray.
    """
    from scipy.optimize import brentq

    e = _as_Z(density, direction)
    enorm = float(matrix_norm(e))
    cache = {}

    def g(t):
        if t not in cache:
            cache[t] = solve_sup_cell(density, grid, t * e, opts).value - level
        return cache[t]

    if g(0.0) > 0:
        return 0.0
    t_hi = level / (density.alpha * enorm)
    lo, hi = 0.0, t_hi
    while hi - lo > 1e-12 * t_hi:
        mid = 0.5 * (lo + hi)
        if density.max_over_cells(grid, mid * e) <= level:
            lo = mid
        else:
            hi = mid
    t_lo = lo
    if g(t_lo) >= 0:
        return t_lo
    if g(t_hi) <= 0:
        return t_hi
    return brentq(g, t_lo, t_hi, xtol=xtol)


def with_tolerance(opts: SupOptions, **kw) -> SupOptions:
    return replace(opts, **kw)
