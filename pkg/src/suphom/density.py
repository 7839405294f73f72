"""Periodic supremal integrands f(x, Z) and the geometry of their sublevel sets.

Builtin forms use a piecewise-constant 1-periodic coefficient ``a`` given on
a uniform partition of the unit cell into ``m^n`` subcells:

* ``coeff_norm``: ``f(x, Z) = a(x) |Z|``
* ``coeff_psi``:  ``f(x, Z) = a(x) psi(|Z|)`` with ``psi(t) = 1`` for
  ``t <= 1`` and ``1 + sqrt(t - 1) + (t - 1)`` otherwise.

Both are continuous and level convex in ``Z``, which is what the direct
cell solver needs. Pointwise gradient constraints (indicator integrands) are
modelled by :class:`suphom.constraint_hom.ConstraintMap` instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (ConfigError, InfeasibleLevelError, NotLevelConvexError,
                     UnsupportedOperationError)
from .sets import BallCells, CallbackCells, matrix_norm, project_ball

log = logging.getLogger(__name__)

BUILTIN_FORMS = ("coeff_norm", "coeff_psi")
LEVEL_CONVEXITY_TOL = 1e-12


def psi(t):
    t = np.asarray(t, dtype=float)
    s = np.maximum(t - 1.0, 0.0)
    return 1.0 + np.sqrt(s) + s


def psi_level_radius(r):
    """Largest ``t`` with ``psi(t) <= r``; ``-1`` marks an empty level (r < 1)."""
    r = np.asarray(r, dtype=float)
    q = 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * np.maximum(r - 1.0, 0.0)))
    return np.where(r < 1.0, -1.0, 1.0 + q * q)


@dataclass(frozen=True)
class SublevelSet:
    """``{W : f(x, W) <= M}`` as a row-sum ball, a box, or the empty set."""

    kind: str
    radius: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def contains(self, W, tol: float = 1e-12) -> bool:
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if self.kind == "empty":
            return False
        if self.kind == "ball":
            return bool(matrix_norm(W) <= self.radius + tol)
        return bool(np.all(W >= self.lo - tol) and np.all(W <= self.hi + tol))

    def project(self, W) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if self.kind == "empty":
            raise InfeasibleLevelError("cannot project onto an empty sublevel set")
        if self.kind == "ball":
            return project_ball(W, self.radius)
        return np.clip(W, self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class PeriodicDensity:
    """A 1-periodic integrand ``f(x, Z)`` with ``Z`` a ``d x n`` matrix.

    ``coeff`` holds the subcell values of ``a`` with shape ``(m,) * n``;
    axis ``k`` of the array runs along ``x_{k+1}``.
    """

    n: int
    d: int
    form: str
    coeff: np.ndarray
    alpha: float
    beta: float
    eval_fn: Optional[Callable] = field(default=None, repr=False)
    project_fn: Optional[Callable] = field(default=None, repr=False)
    sublevel_fn: Optional[Callable] = field(default=None, repr=False)
    level_convex: bool = True

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError("dimensions n and d must be positive")
        if self.form not in BUILTIN_FORMS + ("custom",):
            raise ConfigError(f"unknown density form {self.form!r}")
        coeff = np.array(self.coeff, dtype=float)
        if coeff.ndim == 1 and self.n > 1:
            m = round(coeff.size ** (1.0 / self.n))
            if m ** self.n != coeff.size:
                raise ConfigError(f"{coeff.size} coefficient values do not form m^{self.n} subcells")
            coeff = coeff.reshape((m,) * self.n)
        if coeff.ndim != self.n or len(set(coeff.shape)) != 1:
            raise ConfigError(f"coefficient array must have shape (m,)*{self.n}, got {coeff.shape}")
        if not np.all(np.isfinite(coeff)) or coeff.min() <= 0:
            raise ConfigError("coefficient values must be finite and strictly positive")
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("growth constants alpha and beta must be positive")
        coeff.flags.writeable = False
        object.__setattr__(self, "coeff", coeff)
        if self.form == "custom" and (self.eval_fn is None or self.project_fn is None):
            raise ConfigError("custom densities need both eval_fn and project_fn")

    # -- construction -------------------------------------------------------

    @classmethod
    def coeff_norm(cls, values, n=1, d=1, alpha=None, beta=None):
        a = np.asarray(values, dtype=float)
        return cls(n=n, d=d, form="coeff_norm", coeff=a,
                   alpha=float(a.min()) if alpha is None else alpha,
                   beta=float(a.max()) if beta is None else beta)

    @classmethod
    def coeff_psi(cls, values, n=1, d=1, alpha=None, beta=None):
        a = np.asarray(values, dtype=float)
        return cls(n=n, d=d, form="coeff_psi", coeff=a,
                   alpha=float(a.min()) if alpha is None else alpha,
                   beta=3.0 * float(a.max()) if beta is None else beta)

    @classmethod
    def custom(cls, eval_fn, project_fn, *, n=1, d=1, alpha, beta,
               sublevel_fn=None, level_convex=True, seed=0, samples=500):
        """Register a user density; level convexity is verified on samples.

        A density that is declared (or found) not level convex can still be
        evaluated, but the cell solvers refuse it.
        """
        dens = cls(n=n, d=d, form="custom", coeff=np.ones((1,) * n), alpha=alpha, beta=beta,
                   eval_fn=eval_fn, project_fn=project_fn, sublevel_fn=sublevel_fn,
                   level_convex=level_convex)
        if level_convex:
            rng = np.random.default_rng(seed)
            bad = 0
            for x in rng.random((4, n)):
                rep = check_level_convexity(dens, x, random_pairs(rng, d, n, samples // 4))
                bad += len(rep.violations)
            if bad:
                log.warning("custom density failed %d level-convexity samples; solvers disabled", bad)
                object.__setattr__(dens, "level_convex", False)
        return dens

    @classmethod
    def from_config(cls, doc: dict):
        try:
            n, d, form = int(doc["n"]), int(doc["d"]), doc["form"]
            m = int(doc["coeff"]["m"])
            values = np.asarray(doc["coeff"]["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed density config: {exc!r}") from exc
        if form not in BUILTIN_FORMS:
            raise ConfigError(f"config form must be one of {BUILTIN_FORMS}, got {form!r}")
        if values.size != m ** n:
            raise ConfigError(f"expected {m ** n} coefficient values, got {values.size}")
        ctor = cls.coeff_norm if form == "coeff_norm" else cls.coeff_psi
        return ctor(values.reshape((m,) * n), n=n, d=d,
                    alpha=doc.get("alpha"), beta=doc.get("beta"))

    def to_config(self) -> dict:
        return {"n": self.n, "d": self.d, "form": self.form,
                "coeff": {"m": self.m, "values": self.coeff.ravel().tolist()},
                "alpha": self.alpha, "beta": self.beta}

    # -- pointwise ----------------------------------------------------------

    @property
    def m(self) -> int:
        return self.coeff.shape[0]

    def coefficient(self, x) -> float:
        x = np.mod(np.asarray(x, dtype=float).reshape(self.n), 1.0)
        idx = np.minimum((x * self.m).astype(int), self.m - 1)
        return float(self.coeff[tuple(idx)])

    def _as_matrix(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float).reshape(self.d, self.n)

    def eval(self, x, Z) -> float:
        if self.form == "custom":
            x = np.mod(np.asarray(x, dtype=float), 1.0)
            return float(self.eval_fn(x, self._as_matrix(Z)))
        a = self.coefficient(x)
        t = float(matrix_norm(self._as_matrix(Z)))
        return a * t if self.form == "coeff_norm" else a * float(psi(t))

    def sublevel(self, x, M: float) -> SublevelSet:
        if M < 0:
            raise ValueError("level M must be nonnegative")
        if self.form == "custom":
            if self.sublevel_fn is None:
                raise UnsupportedOperationError("custom density has no sublevel callback")
            return self.sublevel_fn(np.mod(np.asarray(x, dtype=float), 1.0), M)
        r = M / self.coefficient(x)
        if self.form == "coeff_norm":
            return SublevelSet("ball", radius=r)
        rho = float(psi_level_radius(r))
        return SublevelSet("empty") if rho < 0 else SublevelSet("ball", radius=rho)

    def project_to_sublevel(self, x, M: float, W) -> np.ndarray:
        W = self._as_matrix(W)
        if self.form == "custom":
            if self.sublevel_fn is not None and self.sublevel(x, M).is_empty:
                raise InfeasibleLevelError(f"empty sublevel set at level {M}")
            return np.asarray(self.project_fn(np.mod(np.asarray(x, dtype=float), 1.0), M, W))
        return self.sublevel(x, M).project(W)

    # -- grid-level helpers -------------------------------------------------

    def require_solvable(self) -> None:
        if not self.level_convex:
            raise NotLevelConvexError("density is not level convex; cell solvers are disabled")

    def cell_coefficients(self, grid) -> np.ndarray:
        if self.n != grid.n:
            raise ConfigError(f"density dimension {self.n} does not match grid dimension {grid.n}")
        return self.coeff[grid.subcell_index(self.m)]

    def _cell_points(self, grid):
        centers = grid.cell_centers.reshape(self.n, -1).T
        return centers

    def cell_eval(self, grid, V, smoothing: float = 0.0, with_grad: bool = False):
        """Evaluate ``f(x_c, V_c)`` on all cells; optionally ``df/dV``.

        ``smoothing`` replaces each row norm by ``sqrt(|V_i|^2 + s^2)`` and,
        for ``coeff_psi``, rounds the square-root kink at ``|V| = 1``.
        """
        V = np.asarray(V, dtype=float)
        if self.form == "custom":
            if with_grad:
                raise UnsupportedOperationError("custom densities do not provide gradients")
            pts = self._cell_points(grid)
            flat = V.reshape(self.d, self.n, -1)
            vals = np.array([self.eval_fn(np.mod(p, 1.0), flat[..., c]) for c, p in enumerate(pts)])
            return vals.reshape(grid.shape)
        a = self.cell_coefficients(grid)
        rows = np.sqrt(np.sum(V * V, axis=1) + smoothing ** 2)
        t = rows.sum(axis=0)
        if self.form == "coeff_norm":
            f = a * t
            dfdt = a
        else:
            s = t - 1.0
            if smoothing > 0:
                root = np.sqrt(s * s + smoothing ** 2)
                sp = 0.5 * (s + root)
                dsp = 0.5 * (1.0 + s / root)
                sq = np.sqrt(sp + smoothing)
                f = a * (1.0 + sq - np.sqrt(smoothing) + sp)
                dfdt = a * dsp * (1.0 + 0.5 / sq)
            else:
                sp = np.maximum(s, 0.0)
                sq = np.sqrt(sp)
                f = a * (1.0 + sq + sp)
                with np.errstate(divide="ignore"):
                    dfdt = np.where(sp > 0, a * (1.0 + 0.5 / np.where(sp > 0, sq, 1.0)), 0.0)
        if not with_grad:
            return f
        unit = np.divide(V, rows[:, None], out=np.zeros_like(V), where=rows[:, None] > 0)
        return f, dfdt * unit

    def cell_sublevels(self, grid, M: float):
        """The product over cells of the sublevel sets at level ``M``."""
        if self.form == "custom":
            pts = self._cell_points(grid)
            if self.sublevel_fn is not None:
                if any(self.sublevel_fn(p, M).is_empty for p in pts):
                    return BallCells(-np.ones(grid.shape), self.d, self.n)
            projs = [(lambda W, p=p: np.asarray(self.project_fn(p, M, W))) for p in pts]
            hint = M / self.alpha
            return CallbackCells(projs, grid.shape, self.d, self.n, radius_hint=hint)
        r = M / self.cell_coefficients(grid)
        radius = r if self.form == "coeff_norm" else psi_level_radius(r)
        return BallCells(radius, self.d, self.n)

    def max_over_cells(self, grid, Z) -> float:
        """``max_c f(x_c, Z)``: the level at which the zero corrector is feasible."""
        V = np.broadcast_to(self._as_matrix(Z)[(...,) + (None,) * grid.n],
                            (self.d, self.n) + grid.shape)
        return float(np.max(self.cell_eval(grid, V)))


# -- sampled diagnostics ----------------------------------------------------


def random_pairs(rng, d, n, count, scale=3.0):
    """Random ``(Z1, Z2, t)`` triples for the level-convexity check."""
    Z1 = rng.normal(scale=scale, size=(count, d, n))
    Z2 = rng.normal(scale=scale, size=(count, d, n))
    t = rng.uniform(0.01, 0.99, size=count)
    return list(zip(Z1, Z2, t))


@dataclass
class LevelConvexityReport:
    checked: int
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def check_level_convexity(density, x, sample_pairs, tol=LEVEL_CONVEXITY_TOL) -> LevelConvexityReport:
    """Flag samples with ``f(tZ1 + (1-t)Z2) > max(f(Z1), f(Z2)) + tol``.

    ``density`` only needs an ``eval(x, Z)`` method.
    """
    violations = []
    for Z1, Z2, t in sample_pairs:
        if not 0.0 < t < 1.0:
            raise ValueError(f"interpolation weight must lie in (0, 1), got {t}")
        Z1, Z2 = np.asarray(Z1, dtype=float), np.asarray(Z2, dtype=float)
        mid = density.eval(x, t * Z1 + (1 - t) * Z2)
        top = max(density.eval(x, Z1), density.eval(x, Z2))
        if mid > top + tol:
            violations.append({"Z1": Z1, "Z2": Z2, "t": float(t), "f_mid": mid, "f_max": top})
    return LevelConvexityReport(checked=len(sample_pairs), violations=violations)


@dataclass
class GrowthReport:
    checked: int
    lower_slack: float
    upper_slack: float
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def check_growth(density, samples, alpha=None, beta=None, tol=1e-12) -> GrowthReport:
    """Check ``alpha |Z| <= f(x, Z) <= beta (|Z| + 1)`` on ``(x, Z)`` samples.

    The slacks are the smallest margins observed on each side; a negative
    slack means the bound failed at that sample.
    """
    alpha = density.alpha if alpha is None else alpha
    beta = density.beta if beta is None else beta
    lo_slack, hi_slack, failures = np.inf, np.inf, []
    for x, Z in samples:
        t = float(matrix_norm(np.asarray(Z, dtype=float).reshape(density.d, density.n)))
        f = density.eval(x, Z)
        lo, hi = f - alpha * t, beta * (t + 1.0) - f
        lo_slack, hi_slack = min(lo_slack, lo), min(hi_slack, hi)
        if lo < -tol or hi < -tol:
            failures.append({"x": np.asarray(x), "Z": np.asarray(Z), "f": f,
                             "lower": alpha * t, "upper": beta * (t + 1.0)})
    return GrowthReport(len(samples), float(lo_slack), float(hi_slack), failures)


def growth_samples(rng, density, count, zmax=10.0):
    """Random ``(x, Z)`` pairs with ``|Z|`` spread over ``[0, zmax]``."""
    out = []
    for _ in range(count):
        x = rng.random(density.n)
        Z = rng.normal(size=(density.d, density.n))
        nz = float(matrix_norm(Z))
        Z = Z * (rng.uniform(0, zmax) / nz if nz > 0 else 0.0)
        out.append((x, Z))
    return out


