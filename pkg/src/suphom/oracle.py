"""Exact reference values in one dimension and for two-dimensional laminates.

In 1D a periodic corrector with ``z + u' in C(x)`` exists iff ``z`` is the
mean of a measurable selection of ``C(x)``. For intervals ``C(x) = [lo, hi]``
the set of such means is ``[int lo, int hi]``, which turns every cell problem
into a scalar bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import psi_level_radius

BISECT_TOL = 1e-12


@dataclass(frozen=True)
class Oracle1D:
    """Piecewise-constant coefficient on ``(0, 1)``.

    ``values[i]`` holds on ``[breaks[i], breaks[i+1])`` with ``breaks``
    padded by 0 and 1; ``breakpoints`` lists only the interior ones.
    """

    values: tuple
    breakpoints: tuple = ()
    form: str = "coeff_norm"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        bps = tuple(float(b) for b in self.breakpoints)
        if not bps and len(vals) > 1:
            bps = tuple(np.arange(1, len(vals)) / len(vals))
        if len(bps) != len(vals) - 1:
            raise ValueError("need one more value than interior breakpoints")
        if any(v <= 0 for v in vals):
            raise ValueError("coefficient must be positive")
        if list(bps) != sorted(bps) or any(not 0 < b < 1 for b in bps):
            raise ValueError("breakpoints must be sorted inside (0, 1)")
        if self.form not in ("coeff_norm", "coeff_psi", "interval_constraint"):
            raise ValueError(f"unknown oracle form {self.form!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "breakpoints", bps)

    @property
    def weights(self) -> np.ndarray:
        edges = np.concatenate([[0.0], self.breakpoints, [1.0]])
        return np.diff(edges)

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.values)

    def radius(self, M: float) -> np.ndarray:
        """Half-width of ``C_M(x)`` on each piece; negative where empty."""
        r = M / self.a
        if self.form == "coeff_psi":
            return psi_level_radius(r)
        return r


def _bisect(feasible, lo, hi, tol=BISECT_TOL):
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sup_hom_1d(oracle: Oracle1D, z: float) -> float:
    """Exact homogenized supremal density at slope ``z``."""
    if oracle.form == "interval_constraint":
        raise ValueError("indicator oracles have no level structure; use effective_interval_1d")
    z = abs(float(z))
    w = oracle.weights

    def feasible(M):
        rho = oracle.radius(M)
        return bool(np.all(rho >= 0) and z <= np.dot(w, rho))

    if feasible(0.0):
        return 0.0
    hi = 1.0
    while not feasible(hi):
        hi *= 2.0
    return _bisect(feasible, 0.0, hi)


def effective_interval_1d(lo_values, hi_values, weights=None) -> tuple:
    """Endpoints of the effective constraint set for ``C(x) = [lo(x), hi(x)]``."""
    lo_values = np.asarray(lo_values, dtype=float)
    hi_values = np.asarray(hi_values, dtype=float)
    w = np.full(lo_values.size, 1.0 / lo_values.size) if weights is None else np.asarray(weights)
    return float(np.dot(w, lo_values)), float(np.dot(w, hi_values))


def lp_hom_1d_closed_form(oracle: Oracle1D, z: float, p: float) -> float:
    """``|z| (int a^{-p'})^{-1/p'}`` with ``p' = p/(p-1)``: the p-th root of the Lp cell value."""
    if p <= 1:
        raise ValueError(f"exponent p must exceed 1, got {p}")
    if oracle.form != "coeff_norm":
        raise ValueError("closed form is available for coeff_norm only")
    q = p / (p - 1.0)
    return abs(float(z)) * float(np.dot(oracle.weights, oracle.a ** (-q))) ** (-1.0 / q)


def sup_hom_laminate_2d(a_values, z, form: str = "coeff_norm", weights=None) -> float:
    """Homogenized supremal density of a laminate ``a(x1)`` at ``z = (z1, z2)``.

    Averaging any corrector in ``x2`` keeps it admissible, so the problem
    reduces to ``M >= a(x1) psi-level(|z2|)`` pointwise together with
    ``|z1| <= int sqrt(rho(x1)^2 - z2^2)``.
    """
    orc = Oracle1D(tuple(a_values), form=form) if weights is None else \
        Oracle1D(tuple(a_values), tuple(np.cumsum(weights)[:-1]), form=form)
    z1, z2 = abs(float(z[0])), abs(float(z[1]))
    w = orc.weights

    def feasible(M):
        rho = orc.radius(M)
        if np.any(rho < z2):
            return False
        return z1 <= np.dot(w, np.sqrt(np.maximum(rho * rho - z2 * z2, 0.0)))

    hi = 1.0
    while not feasible(hi):
        hi *= 2.0
    return _bisect(feasible, 0.0, hi)


def effective_radius_laminate_2d(radii, direction, weights=None) -> float:
    """Largest ``t`` with ``t e`` in the effective set of balls ``B(0, r(x1))``."""
    r = np.asarray(radii, dtype=float)
    w = np.full(r.size, 1.0 / r.size) if weights is None else np.asarray(weights, dtype=float)
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    e1, e2 = abs(e[0]), abs(e[1])

    def feasible(t):
        if np.any(r < t * e2):
            return False
        return t * e1 <= np.dot(w, np.sqrt(np.maximum(r * r - (t * e2) ** 2, 0.0)))

    lo, hi = 0.0, float(r.max())
    if feasible(hi):
        return hi
    while hi - lo > BISECT_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
