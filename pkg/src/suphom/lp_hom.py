"""The Lp cell problem and its p-th roots.

For fixed ``p`` the periodic cell value is

    f_hom_p(Z) = min_u (1/j^n) int_{jY} f(x, Z + Du)^p dx,

discretized on a :class:`~suphom.grid.CellGrid` with one sample per cell.
The solver minimizes the equivalent p-norm ``R = E^(1/p)`` by Nesterov-
accelerated gradient descent in the space of discrete gradients: the descent
direction is the cellwise gradient of ``R`` projected onto discrete periodic
gradients, which is the Sobolev-preconditioned gradient with respect to the
node field. Backtracking keeps each accepted step a sufficient decrease and
momentum is reset whenever it would raise the objective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .feasibility import broadcast_matrix
from .sets import matrix_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LpOptions:
    tol_rel: float = 1e-8
    max_iter: int = 20000
    smoothing: float = 1e-7
    projection: str = "fft"
    step0: float = 1.0

    def __post_init__(self):
        if not (self.tol_rel > 0 and self.step0 > 0 and self.smoothing >= 0):
            raise ValueError("tol_rel and step0 must be positive, smoothing nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class LpHomEstimate:
    Z: np.ndarray
    p: float
    j: int
    value_root: float
    energy: float
    energy_smoothed: float
    iterations: int
    final_step: float
    converged: bool
    grad_norm: float = np.nan
    corrector: np.ndarray = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)

    def to_row(self) -> dict:
        return {"p": self.p, "energy": self.energy, "value_root": self.value_root,
                "converged": self.converged}


def _check_p(p):
    if not p > 1:
        raise ValueError(f"exponent p must exceed 1, got {p}")


def lp_energy(density, grid, Z, u, p, smoothing=0.0):
    """Smoothed discrete energy ``mean_c f^p(x_c, Z + Du_c)`` and its gradient in ``u``."""
    _check_p(p)
    Zc = broadcast_matrix(Z, grid, density.d, density.n)
    f, df = density.cell_eval(grid, Zc + grid.gradient(u), smoothing, with_grad=True)
    E = float(np.mean(f ** p))
    dEdW = (p / grid.ncells) * f ** (p - 1) * df
    return E, -grid.divergence(dEdW)


def _pnorm(f, p):
    s = float(f.max())
    if s == 0.0:
        return 0.0
    return s * float(np.mean((f / s) ** p)) ** (1.0 / p)


class _Objective:
    """``R(W) = (mean f^p)^(1/p)`` and its projected cellwise gradient."""

    def __init__(self, density, grid, Z, p, smoothing, projection):
        self.density, self.grid, self.p = density, grid, p
        self.Zc = broadcast_matrix(Z, grid, density.d, density.n)
        self.smoothing, self.projection = smoothing, projection
        self.evals = 0

    def value(self, W):
        self.evals += 1
        return _pnorm(self.density.cell_eval(self.grid, self.Zc + W, self.smoothing), self.p)

    def value_grad(self, W):
        self.evals += 1
        f, df = self.density.cell_eval(self.grid, self.Zc + W, self.smoothing, with_grad=True)
        R = _pnorm(f, self.p)
        if R == 0.0:
            return R, np.zeros(self.Zc.shape[:1] + self.grid.shape), np.zeros_like(W)
        g = (f / R) ** (self.p - 1) * df
        du, dW = self.grid.project_to_gradients(g, method=self.projection)
        return R, du, dW


def _rms(X) -> float:
    return float(np.sqrt(np.mean(np.sum(X * X, axis=(0, 1)))))


def _stop(gsq, step, gap_bound, R, rel):
    R = max(R, 1e-300)
    return gap_bound <= rel * R or step * gsq <= 1e-2 * rel * R


def solve_lp_cell(density, grid, Z, p, opts: LpOptions = LpOptions(), u0=None) -> LpHomEstimate:
    """Near-minimizer of the discrete Lp cell energy at macroscopic gradient ``Z``.

    Stops when ``|grad| * (1 + |Z| + |Du|) <= (tol_rel / p) * R`` (a convexity
    bound on the gap) or when the predicted decrease of one gradient step,
    ``step * |grad|^2``, falls below ``1e-2 * (tol_rel / p) * R``. The second
    test is what fires in practice: the first needs ``|grad|`` below the
    square root of machine precision, where backtracking can no longer
    resolve a decrease.
    """
    _check_p(p)
    Z = np.asarray(Z, dtype=float).reshape(density.d, density.n)
    obj = _Objective(density, grid, Z, p, opts.smoothing, opts.projection)
    zn = float(matrix_norm(Z))

    if u0 is None:
        u = np.zeros((density.d,) + grid.shape)
    else:
        u = np.asarray(u0, dtype=float)
        u = u - u.mean(axis=grid.spatial_axes, keepdims=True)
    W = grid.gradient(u)
    Rx = obj.value(W)
    yu, yW, Ry = u.copy(), W.copy(), Rx
    tk = 1.0
    step = opts.step0
    history = [Rx]
    converged = False
    gnorm = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        Ry, du, dW = obj.value_grad(yW)
        gsq = float(np.mean(np.sum(dW * dW, axis=(0, 1))))
        gnorm = np.sqrt(gsq)
        if _stop(gsq, step, gnorm * (1.0 + zn + _rms(yW)), Ry, opts.tol_rel / p):
            converged = True
            if Ry <= Rx:
                u, W, Rx = yu, yW, Ry
            break
        # backtracking on the sufficient-decrease condition
        while True:
            zW = yW - step * dW
            Rz = obj.value(zW)
            if Rz <= Ry - 0.5 * step * gsq or step < 1e-300:
                break
            step *= 0.5
        if Rz > Rx:
            # momentum overshoot: restart from the last accepted point
            yu, yW, tk = u, W, 1.0
            continue
        zu = yu - step * du
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        mom = (tk - 1.0) / tn
        yu = zu + mom * (zu - u)
        yW = zW + mom * (zW - W)
        u, W, Rx, tk = zu, zW, Rz, tn
        history.append(Rx)
        if mom == 0.0:
            yu, yW = u, W
        step *= 2.0
    else:
        it = opts.max_iter

    f_plain = density.cell_eval(grid, obj.Zc + W)
    energy = float(np.mean(f_plain ** p))
    smoothed = float(np.mean(density.cell_eval(grid, obj.Zc + W, opts.smoothing) ** p))
    if not converged:
        log.info("Lp solve did not converge: p=%g Z=%s grad=%.3e", p, Z.ravel(), gnorm)
    return LpHomEstimate(Z=Z, p=float(p), j=grid.j, value_root=energy ** (1.0 / p), energy=energy,
                         energy_smoothed=smoothed, iterations=it, final_step=step,
                         converged=converged, grad_norm=gnorm, corrector=u, history=history)


def p_sweep(density, grid, Z, ps, opts: LpOptions = LpOptions()) -> list:
    """Warm-started solves along an increasing list of exponents."""
    ps = [float(p) for p in ps]
    for p in ps:
        _check_p(p)
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("exponents must be strictly increasing")
    out, u = [], None
    for p in ps:
        est = solve_lp_cell(density, grid, Z, p, opts, u0=u)
        out.append(est)
        u = est.corrector
    return out


def is_nondecreasing(estimates, slack: float) -> bool:
    roots = [e.value_root for e in estimates]
    return all(b >= a - slack * max(abs(a), 1.0) for a, b in zip(roots, roots[1:]))


@dataclass
class MacroLimitReport:
    ps: list
    curve: list                 # (sum_i w_i f_hom_p(Z_i))^(1/p) per p
    piece_roots: list           # per piece, value_root per p
    sup_values: list            # direct-route f_hom(Z_i)
    target: float               # max_i f_hom(Z_i)
    gaps: list
    extrapolated: float         # two-point extrapolation in 1/p of the last two entries

    @property
    def terminal_gap(self) -> float:
        return self.gaps[-1]


def macro_sup_limit(density, grid, pieces, ps, opts: LpOptions = LpOptions(), sup_opts=None) -> MacroLimitReport:
    """Lp energies of a piecewise-affine field versus the ess-sup of the direct density.

    ``pieces`` is a list of ``(Z_i, w_i)`` with positive weights summing to one.
    """
    from .sup_hom import SupOptions, solve_sup_cell

    Zs = [np.asarray(z, dtype=float) for z, _ in pieces]
    w = np.array([float(wt) for _, wt in pieces])
    if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("piece weights must be positive and sum to one")
    sweeps = [p_sweep(density, grid, z, ps, opts) for z in Zs]
    ps = [e.p for e in sweeps[0]]
    curve = []
    for k, p in enumerate(ps):
        roots = np.array([sw[k].value_root for sw in sweeps])
        top = roots.max()
        if top == 0.0:
            curve.append(0.0)
            continue
        curve.append(float(top * np.dot(w, (roots / top) ** p) ** (1.0 / p)))
    sup_vals = [solve_sup_cell(density, grid, z, sup_opts or SupOptions()).value for z in Zs]
    target = max(sup_vals)
    if len(ps) >= 2:
        p1, p2 = ps[-2], ps[-1]
        extrap = (p2 * curve[-1] - p1 * curve[-2]) / (p2 - p1)
    else:
        extrap = curve[-1]
    return MacroLimitReport(ps=ps, curve=curve,
                            piece_roots=[[e.value_root for e in sw] for sw in sweeps],
                            sup_values=sup_vals, target=target,
                            gaps=[target - c for c in curve], extrapolated=float(extrap))
