"""Periodic-gradient convex feasibility by projection methods.

Find a periodic node field ``u`` with ``Z + (Du)_c`` inside a convex set
``C_c`` for every grid cell. Two sets are involved: the affine space
``A = {Z + G : G a discrete gradient}`` (exact projection from the grid) and
the product ``B`` of the per-cell sets. Plain alternating projections and
Douglas-Rachford splitting are available; the latter is the default since
alternating projections crawl when the sets meet almost tangentially.

Infeasibility is proved by a dual certificate. A residual field with its
gradient part removed is orthogonal to every discrete gradient, so
``<L, W> = <L, Z>`` for all ``W`` in ``A`` while ``<L, W> <= sigma_B(L)`` on
``B``; ``<L, Z> > sigma_B(L)`` separates the two sets. The residual used is
``V - P_B(V)`` for alternating projections and the increment of the
governing sequence for Douglas-Rachford, both of which converge to the
minimal displacement between the sets. Stall detection on the distance
between the iterates is the fallback for sets without a support function.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .sets import cell_distance, matrix_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeasibilityOptions:
    tol_feas: float = 1e-7
    stall_window: int = 200
    stall_rate: float = 1e-12
    max_iter: int = 20000
    cert_every: int = 5
    cert_tol: float = 1e-10
    projection: str = "fft"
    method: str = "douglas_rachford"

    def __post_init__(self):
        for name in ("tol_feas", "stall_rate", "cert_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.stall_window < 1 or self.max_iter < 1 or self.cert_every < 1:
            raise ValueError("iteration counts must be positive")
        if self.method not in ("douglas_rachford", "alternating"):
            raise ValueError(f"unknown feasibility method {self.method!r}")
        if self.projection not in ("fft", "cg"):
            raise ValueError(f"unknown projection method {self.projection!r}")


@dataclass
class FeasibilityResult:
    status: str                     # "feasible" | "infeasible" | "undecided"
    iterations: int
    max_violation: float
    u: Optional[np.ndarray] = field(default=None, repr=False)
    G: Optional[np.ndarray] = field(default=None, repr=False)
    gap: float = 0.0
    reason: str = ""
    state: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def summary(self) -> dict:
        return {"status": self.status, "iterations": self.iterations,
                "max_violation": self.max_violation, "gap": self.gap, "reason": self.reason}


def broadcast_matrix(Z, grid, d, n) -> np.ndarray:
    Z = np.asarray(Z, dtype=float).reshape(d, n)
    return np.broadcast_to(Z[(...,) + (None,) * grid.n], (d, n) + grid.shape)


def _certificate_gap(grid, R, Zc, sets, projection) -> float:
    """Separation margin of the divergence-free part of ``R``; positive proves infeasibility."""
    _, RG = grid.project_to_gradients(R, method=projection)
    L = R - RG
    scale = float(np.sum(np.sqrt(np.sum(L * L, axis=(0, 1)))))
    if scale == 0.0:
        return -np.inf
    return (float(np.sum(L * Zc)) - sets.support(L)) / scale


def find_corrector(sets, grid, Z, opts: FeasibilityOptions = FeasibilityOptions(),
                   warm: Optional[FeasibilityResult] = None) -> FeasibilityResult:
    """Search for a periodic corrector keeping ``Z + Du`` inside ``sets`` cellwise."""
    if opts.method == "alternating":
        return _alternating(sets, grid, Z, opts, warm)
    if opts.method == "douglas_rachford":
        return _douglas_rachford(sets, grid, Z, opts, warm)
    raise ValueError(f"unknown feasibility method {opts.method!r}")


def _setup(sets, grid, Z):
    d, n = sets.d, sets.n
    Zc = broadcast_matrix(Z, grid, d, n)
    zscale = 1.0 + float(matrix_norm(np.asarray(Z, dtype=float).reshape(d, n)))
    return Zc, zscale


def _stalled(history, it, opts, viol) -> bool:
    if it <= opts.stall_window or viol <= 10 * opts.tol_feas:
        return False
    old = history[it - 1 - opts.stall_window]
    return old - history[-1] <= opts.stall_rate * old


def _alternating(sets, grid, Z, opts, warm):
    Zc, zscale = _setup(sets, grid, Z)
    if sets.empty:
        return FeasibilityResult("infeasible", 0, np.inf, gap=np.inf, reason="empty")
    if warm is not None and warm.G is not None:
        u, G = warm.u.copy(), warm.G.copy()
    else:
        u, G = np.zeros((sets.d,) + grid.shape), np.zeros(Zc.shape)

    history = []
    viol = np.inf
    for it in range(1, opts.max_iter + 1):
        V = Zc + G
        P = sets.project(V)
        dist = cell_distance(V, P)
        viol = float(dist.max())
        if viol <= opts.tol_feas:
            return FeasibilityResult("feasible", it, viol, u=u, G=G)
        if sets.support is not None and it % opts.cert_every == 0:
            gap = _certificate_gap(grid, V - P, Zc, sets, opts.projection)
            if gap > opts.cert_tol * zscale:
                return FeasibilityResult("infeasible", it, viol, u=u, G=G, gap=gap, reason="certificate")
        history.append(float(np.sqrt(np.mean(dist * dist))))
        if _stalled(history, it, opts, viol):
            return FeasibilityResult("infeasible", it, viol, u=u, G=G, gap=history[-1], reason="stall")
        u, G = grid.project_to_gradients(P - Zc, method=opts.projection)

    log.debug("feasibility undecided after %d iterations (violation %.3e)", opts.max_iter, viol)
    return FeasibilityResult("undecided", opts.max_iter, viol, u=u, G=G, reason="max_iter")


def _douglas_rachford(sets, grid, Z, opts, warm):
    # governing sequence x; shadows P_B(x) and its projection back onto the affine space
    Zc, zscale = _setup(sets, grid, Z)
    if sets.empty:
        return FeasibilityResult("infeasible", 0, np.inf, gap=np.inf, reason="empty")
    if warm is not None and warm.state is not None:
        x = warm.state.copy()
    elif warm is not None and warm.G is not None:
        x = Zc + warm.G
    else:
        x = Zc.copy()

    history = []
    viol = np.inf
    u = G = None
    for it in range(1, opts.max_iter + 1):
        pb = sets.project(x)
        u, G = grid.project_to_gradients(pb - Zc, method=opts.projection)
        pa = Zc + G
        dist = cell_distance(pa, sets.project(pa))
        viol = float(dist.max())
        if viol <= opts.tol_feas:
            return FeasibilityResult("feasible", it, viol, u=u, G=G, state=x)
        _, Gr = grid.project_to_gradients(2 * pb - x - Zc, method=opts.projection)
        step = Zc + Gr - pb
        if sets.support is not None and it % opts.cert_every == 0:
            # the increments converge to the minimal displacement between the sets
            gap = _certificate_gap(grid, step, Zc, sets, opts.projection)
            if gap > opts.cert_tol * zscale:
                return FeasibilityResult("infeasible", it, viol, u=u, G=G, gap=gap,
                                         reason="certificate", state=x + step)
        history.append(float(np.sqrt(np.mean(dist * dist))))
        if _stalled(history, it, opts, viol):
            return FeasibilityResult("infeasible", it, viol, u=u, G=G, gap=history[-1],
                                     reason="stall", state=x + step)
        x = x + step

    log.debug("feasibility undecided after %d iterations (violation %.3e)", opts.max_iter, viol)
    return FeasibilityResult("undecided", opts.max_iter, viol, u=u, G=G, reason="max_iter", state=x)
