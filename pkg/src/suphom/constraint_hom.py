"""Homogenization of pointwise gradient constraints.

A periodic family of convex sets ``C(x)`` induces the effective set ``C_inf``
of macroscopic gradients ``Z`` that admit a periodic corrector with
``Z + Dv(x)`` in ``C(x)`` almost everywhere. The effective set is sampled
through its radial function ``t*(e) = max{t : t e in C_inf}``, computed by
bisection on a feasibility oracle.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .density import PeriodicDensity, psi_level_radius
from .errors import ConfigError, InfeasibleLevelError
from .feasibility import FeasibilityOptions, FeasibilityResult, find_corrector
from .grid import CellGrid
from .sets import BallCells, BoxCells, cell_distance, dual_matrix_norm, matrix_norm
from .sup_hom import SupOptions, level_root_along_ray

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConstraintMap:
    """Piecewise-constant periodic convex sets on ``m^n`` subcells of ``Y``.

    ``kind="ball"``: ``C(x) = {|Z| <= radius(x)}`` in the row-sum norm,
    ``radius`` of shape ``(m,)*n``. ``kind="box"``: componentwise bounds
    ``lo, hi`` of shape ``(d, n) + (m,)*n``. ``kind="sublevel"`` wraps the
    sublevel sets of a density at a fixed level.
    """

    n: int
    d: int
    kind: str
    radius: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    density: Optional[PeriodicDensity] = field(default=None, repr=False)
    level: float = 0.0

    @classmethod
    def balls(cls, radius, n=1, d=1):
        r = np.asarray(radius, dtype=float)
        if r.ndim == 1 and n > 1:
            m = round(r.size ** (1.0 / n))
            r = r.reshape((m,) * n)
        if np.any(r < 0):
            raise ConfigError("ball radii must be nonnegative")
        return cls(n=n, d=d, kind="ball", radius=r)

    @classmethod
    def boxes(cls, lo, hi, n=1, d=1):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.shape[:2] != (d, n):
            raise ConfigError("box bounds must have shape (d, n) + (m,)*n")
        if np.any(lo > hi):
            raise ConfigError("box lower bounds exceed upper bounds")
        return cls(n=n, d=d, kind="box", lo=lo, hi=hi)

    @classmethod
    def from_sublevel(cls, density: PeriodicDensity, level: float):
        """``C(x) = {Z : f(x, Z) <= level}``."""
        if density.form in ("coeff_norm", "coeff_psi"):
            r = level / density.coeff
            if density.form == "coeff_psi":
                r = psi_level_radius(r)
            if np.any(r < 0):
                raise InfeasibleLevelError(f"sublevel set at level {level} is empty somewhere")
            return cls(n=density.n, d=density.d, kind="ball", radius=r, density=density, level=level)
        return cls(n=density.n, d=density.d, kind="sublevel", density=density, level=level)

    @property
    def m(self) -> int:
        if self.kind == "ball":
            return self.radius.shape[0]
        if self.kind == "box":
            return self.lo.shape[-1]
        return self.density.m

    def cell_sets(self, grid: CellGrid):
        if grid.n != self.n:
            raise ConfigError(f"constraint dimension {self.n} does not match grid dimension {grid.n}")
        if self.kind == "sublevel":
            return self.density.cell_sublevels(grid, self.level)
        idx = grid.subcell_index(self.m)
        if self.kind == "ball":
            return BallCells(self.radius[idx], self.d, self.n)
        sl = (slice(None), slice(None)) + idx
        return BoxCells(self.lo[sl], self.hi[sl])

    def bounding_radius(self) -> float:
        if self.kind == "ball":
            return float(self.radius.max())
        if self.kind == "box":
            ext = np.maximum(np.abs(self.lo), np.abs(self.hi))
            return float(np.sqrt(np.sum(ext * ext, axis=(0, 1))).max())
        return self.level / self.density.alpha


def indicator_feasible(cmap: ConstraintMap, grid: CellGrid, Z,
                       opts: FeasibilityOptions = FeasibilityOptions(),
                       warm: Optional[FeasibilityResult] = None) -> FeasibilityResult:
    """Is the homogenized indicator zero at ``Z``?"""
    Z = np.asarray(Z, dtype=float).reshape(cmap.d, cmap.n)
    return find_corrector(cmap.cell_sets(grid), grid, Z, opts, warm)


def default_directions(d: int, n: int, count: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """Unit directions (Frobenius) of shape ``(k, d, n)``.

    ``{+1, -1}`` for scalar gradients, equispaced angles in the plane
    (64 by default) and a Fibonacci sphere in three dimensions (256 by
    default). Higher dimensions use seeded Gaussian samples.
    """
    dim = d * n
    if dim == 1:
        e = np.array([[1.0], [-1.0]])
    elif dim == 2:
        k = count or 64
        th = 2 * np.pi * np.arange(k) / k
        e = np.stack([np.cos(th), np.sin(th)], axis=1)
    elif dim == 3:
        k = count or 256
        i = np.arange(k) + 0.5
        phi = np.arccos(1 - 2 * i / k)
        th = np.pi * (1 + 5 ** 0.5) * i
        e = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
    else:
        k = count or 256
        e = np.random.default_rng(seed).normal(size=(k, dim))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
    return e.reshape(-1, d, n)


@dataclass(frozen=True)
class EffectiveSetOptions:
    tol_t: float = 1e-4
    feas: FeasibilityOptions = FeasibilityOptions()

    def __post_init__(self):
        if not self.tol_t > 0:
            raise ValueError("tol_t must be positive")


@dataclass
class EffectiveSet:
    directions: np.ndarray          # (k, d, n), unit Frobenius norm
    radii: np.ndarray               # certified-feasible end of each bracket
    upper: np.ndarray               # infeasible (or undecided) end of each bracket
    tol_t: float
    conservative: np.ndarray = field(default=None, repr=False)

    def points(self) -> np.ndarray:
        return self.radii[:, None, None] * self.directions

    def hull_vertices(self) -> np.ndarray:
        """Boundary samples that are vertices of their convex hull, shape ``(v, d*n)``."""
        pts = self.points().reshape(len(self.radii), -1)
        if pts.shape[1] == 1:
            return np.array([[pts.min()], [pts.max()]])
        from scipy.spatial import ConvexHull

        hull = ConvexHull(pts)
        return pts[hull.vertices]


def _check_unit(directions):
    norms = np.sqrt(np.sum(directions ** 2, axis=(1, 2)))
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("directions must be unit-normalized (Frobenius norm)")


def radial_bisection(cmap, grid, e, t_max, opts: EffectiveSetOptions):
    """Bracket ``[t_lo, t_hi]`` for the boundary of the effective set along ``e``."""
    lo, hi = 0.0, t_max
    warm, conservative = None, False
    res = indicator_feasible(cmap, grid, hi * e, opts.feas)
    if res.feasible:
        return hi, hi, False
    while hi - lo > opts.tol_t:
        t = 0.5 * (lo + hi)
        res = indicator_feasible(cmap, grid, t * e, opts.feas, warm)
        if res.feasible:
            lo = t
        else:
            hi = t
            conservative |= res.status == "undecided"
        warm = res if res.G is not None else warm
    return lo, hi, conservative


def effective_set(cmap: ConstraintMap, grid: CellGrid, directions=None,
                  opts: EffectiveSetOptions = EffectiveSetOptions(), workers: int = 0) -> EffectiveSet:
    """Radial samples of the effective constraint set, one bisection per direction."""
    if directions is None:
        directions = default_directions(cmap.d, cmap.n)
    directions = np.asarray(directions, dtype=float).reshape(-1, cmap.d, cmap.n)
    _check_unit(directions)
    origin = indicator_feasible(cmap, grid, np.zeros((cmap.d, cmap.n)), opts.feas)
    if not origin.feasible:
        raise InfeasibleLevelError("the origin is not in the effective set; radial sampling is undefined")
    t_max = cmap.bounding_radius() * (1.0 + 1e-9)

    def one(e):
        return radial_bisection(cmap, grid, e, t_max, opts)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, directions))
    else:
        out = [one(e) for e in directions]
    lo, hi, cons = (np.array(v) for v in zip(*out))
    return EffectiveSet(directions=directions, radii=lo.astype(float), upper=hi.astype(float),
                        tol_t=opts.tol_t, conservative=cons.astype(bool))


@dataclass
class CrossCheckReport:
    directions: np.ndarray
    t_indicator: np.ndarray
    t_sublevel: np.ndarray
    tolerance: float

    @property
    def diffs(self) -> np.ndarray:
        return np.abs(self.t_indicator - self.t_sublevel)

    @property
    def max_diff(self) -> float:
        return float(self.diffs.max())

    @property
    def passed(self) -> bool:
        return self.max_diff <= self.tolerance


def cross_check_sublevel(density: PeriodicDensity, grid: CellGrid, level: float, directions=None,
                         opts: EffectiveSetOptions = EffectiveSetOptions(),
                         sup_opts: SupOptions = SupOptions(), tolerance: float = 2e-3,
                         workers: int = 0) -> CrossCheckReport:
    """Compare the indicator route with the root of ``f_hom(t e) = level``.

    The first route bisects on feasibility for the constraint ``f(x, .) <= level``;
    the second runs the direct cell solver along each ray.
    """
    density.require_solvable()
    cmap = ConstraintMap.from_sublevel(density, level)
    eset = effective_set(cmap, grid, directions, opts, workers)

    def root(e):
        return level_root_along_ray(density, grid, e, level, sup_opts, xtol=opts.tol_t)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            t_sub = list(pool.map(root, eset.directions))
    else:
        t_sub = [root(e) for e in eset.directions]
    return CrossCheckReport(eset.directions, eset.radii, np.array(t_sub), tolerance)


@dataclass
class ConvexityReport:
    pairs: int
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def check_midpoint_convexity(cmap: ConstraintMap, grid: CellGrid, eset: EffectiveSet, pairs: int = 100,
                             seed: int = 0, shrink: float = 1e-3,
                             opts: FeasibilityOptions = FeasibilityOptions()) -> ConvexityReport:
    """Midpoints of sampled boundary points must stay feasible.

    Midpoints are pulled toward the origin by the relative factor ``shrink``
    so that solver tolerance at the boundary does not decide the outcome.
    """
    rng = np.random.default_rng(seed)
    pts = eset.points()
    failures = []
    for _ in range(pairs):
        i, k = rng.choice(len(pts), size=2, replace=False)
        mid = 0.5 * (pts[i] + pts[k]) * (1.0 - shrink)
        res = indicator_feasible(cmap, grid, mid, opts)
        if not res.feasible:
            failures.append({"i": int(i), "k": int(k), "midpoint": mid, "status": res.status})
    return ConvexityReport(pairs, failures)


@dataclass
class HypothesisReport:
    membership_failures: list
    inner_ball_ok: bool
    outer_ball_ok: bool
    sphere_failures: list
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (not self.membership_failures and self.inner_ball_ok and self.outer_ball_ok
                and not self.sphere_failures)


def _cube_contains_ball(points: np.ndarray, delta: float, d: int, n: int, tol: float) -> bool:
    if points.shape[1] == 1:
        return points.min() <= -delta + tol and points.max() >= delta - tol
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(points)
    except QhullError:
        return False
    for eq in hull.equations:
        normal, offset = eq[:-1], eq[-1]
        reach = delta * float(dual_matrix_norm(normal.reshape(d, n)))
        if reach > -offset + tol:
            return False
    return True


def validate_H3_H4(cmap: ConstraintMap, grid: CellGrid, delta: float, vertices, margin: float = 1e-3,
                   directions=None, opts: FeasibilityOptions = FeasibilityOptions(),
                   tol: float = 1e-12) -> HypothesisReport:
    """Sampled evidence for the two technical hypotheses on the constraint sets.

    (a) every vertex lies in ``C(x)`` at every cell center; (b) the ball of
    radius ``delta`` lies in the cube spanned by the vertices, which lies in
    the closed ball of radius ``2 delta``; (c) points at radius
    ``2 delta (1 - margin)`` belong to the effective set.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    d, n = cmap.d, cmap.n
    A = np.asarray(vertices, dtype=float).reshape(-1, d, n)
    sets = cmap.cell_sets(grid)
    centers = grid.cell_centers.reshape(n, -1).T

    membership = []
    for i, Ai in enumerate(A):
        V = np.broadcast_to(Ai[(...,) + (None,) * n], (d, n) + grid.shape)
        dist = cell_distance(V, sets.project(V)).ravel()
        bad = np.flatnonzero(dist > tol)
        if bad.size:
            membership.append({"vertex": i, "x": centers[bad[0]], "distance": float(dist[bad[0]])})

    norms = np.array([float(matrix_norm(Ai)) for Ai in A])
    outer_ok = bool(np.all(norms <= 2 * delta + tol))
    inner_ok = _cube_contains_ball(A.reshape(len(A), -1), delta, d, n, tol)

    if directions is None:
        directions = default_directions(d, n)
    directions = np.asarray(directions, dtype=float).reshape(-1, d, n)
    radius = 2 * delta * (1 - margin)
    sphere = []
    for e in directions:
        Z = radius * e / float(matrix_norm(e))
        res = indicator_feasible(cmap, grid, Z, opts)
        if not res.feasible:
            sphere.append({"Z": Z, "status": res.status})
    return HypothesisReport(membership, inner_ok, outer_ok, sphere,
                            details={"vertex_norms": norms.tolist(), "sphere_radius": radius})
