"""Products of per-cell convex sets and their Euclidean projections.

The feasibility engine needs three things from the constraint side: the
projection onto every cell's set, the per-cell distance to it, and (when
available) the support function used to certify infeasibility.

Matrices are measured with the row-sum norm ``|Z| = sum_i |Z_i|`` (Euclidean
norm of each row). Its unit ball is the l1/l2 group ball, whose Frobenius
projection is exact: project the vector of row norms onto the l1 ball and
rescale each row.
"""

from __future__ import annotations

import numpy as np


def matrix_norm(Z: np.ndarray) -> np.ndarray:
    """Row-sum norm over the two leading axes ``(d, n)``."""
    Z = np.asarray(Z, dtype=float)
    return np.sqrt(np.sum(Z * Z, axis=1)).sum(axis=0)


def dual_matrix_norm(L: np.ndarray) -> np.ndarray:
    """Dual of :func:`matrix_norm`: the largest row Euclidean norm."""
    L = np.asarray(L, dtype=float)
    return np.sqrt(np.sum(L * L, axis=1)).max(axis=0)


def _project_l1_nonneg(r: np.ndarray, radius: np.ndarray) -> np.ndarray:
    # r >= 0 of shape (d, ...); projection onto {w >= 0, sum w <= radius}
    total = r.sum(axis=0)
    inside = total <= radius
    if np.all(inside):
        return r
    d = r.shape[0]
    u = -np.sort(-r, axis=0)
    css = np.cumsum(u, axis=0) - radius
    k = np.arange(1, d + 1).reshape((d,) + (1,) * (r.ndim - 1))
    cond = u - css / k > 0
    last = d - 1 - np.argmax(cond[::-1], axis=0)
    theta = np.take_along_axis(css, last[None], axis=0)[0] / (last + 1)
    theta = np.maximum(theta, 0.0)
    w = np.maximum(r - theta, 0.0)
    w = np.where(radius <= 0, 0.0, w)
    return np.where(inside, r, w)


def project_ball(V: np.ndarray, radius) -> np.ndarray:
    """Frobenius projection of ``V`` (shape ``(d, n, ...)``) onto row-sum balls."""
    V = np.asarray(V, dtype=float)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), V.shape[2:])
    rows = np.sqrt(np.sum(V * V, axis=1))
    if V.shape[0] == 1:
        target = np.minimum(rows[0], radius)[None]
    else:
        target = _project_l1_nonneg(rows, radius)
    scale = np.divide(target, rows, out=np.zeros_like(rows), where=rows > 0)
    return V * scale[:, None]


class BallCells:
    """Row-sum norm balls ``{W : |W| <= radius_c}`` centered at the origin."""

    def __init__(self, radius: np.ndarray, d: int, n: int):
        self.radius = np.asarray(radius, dtype=float)
        self.d, self.n = d, n

    @property
    def empty(self) -> bool:
        return bool(np.any(self.radius < 0))

    def project(self, V):
        return project_ball(V, self.radius)

    def support(self, L) -> float:
        return float(np.sum(self.radius * dual_matrix_norm(L)))

    def bounding_radius(self) -> float:
        # Frobenius extent; the row-sum ball is contained in the Frobenius ball
        return float(self.radius.max())


class BoxCells:
    """Componentwise intervals ``lo <= W <= hi`` per cell."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.d, self.n = self.lo.shape[:2]

    @property
    def empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    def project(self, V):
        return np.clip(V, self.lo, self.hi)

    def support(self, L) -> float:
        L = np.asarray(L, dtype=float)
        return float(np.sum(np.where(L > 0, self.hi * L, self.lo * L)))

    def bounding_radius(self) -> float:
        ext = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return float(np.sqrt(np.sum(ext * ext, axis=(0, 1))).max())


class CallbackCells:
    """Per-cell projections supplied as Python callables (no support function)."""

    support = None

    def __init__(self, projectors, shape, d, n, radius_hint=None):
        self.projectors = projectors
        self.shape = shape
        self.d, self.n = d, n
        self.radius_hint = radius_hint
        self.empty = False

    def project(self, V):
        out = np.empty_like(V)
        for flat, proj in enumerate(self.projectors):
            idx = np.unravel_index(flat, self.shape)
            sl = (slice(None), slice(None)) + idx
            out[sl] = proj(V[sl])
        return out

    def bounding_radius(self) -> float:
        if self.radius_hint is None:
            raise ValueError("callback cell sets need an explicit bounding radius")
        return float(self.radius_hint)


def cell_distance(V, P) -> np.ndarray:
    """Frobenius distance per cell between two cell tensor fields."""
    R = np.asarray(V) - np.asarray(P)
    return np.sqrt(np.sum(R * R, axis=(0, 1)))
