"""Uniform periodic grids on the cell jY = (0, j)^n and discrete gradients.

Node fields ``u`` have shape ``(d, *grid.shape)``; cell tensor fields ``W``
have shape ``(d, n, *grid.shape)``. Cell ``c`` spans the nodes ``c`` and
``c + e_k`` along each axis, so node and cell arrays share their index set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConfigError, SolverError


@dataclass(frozen=True)
class CellGrid:
    """Periodic grid with ``N`` nodes per unit length covering ``(0, j)^n``."""

    n: int
    j: int = 1
    N: int = 64

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"dimension n must be positive, got {self.n}")
        if self.j < 1:
            raise ConfigError(f"cell multiplicity j must be positive, got {self.j}")
        if self.N < 2:
            raise ConfigError(f"grid resolution N must be at least 2, got {self.N}")

    @property
    def size(self) -> int:
        return self.j * self.N

    @property
    def shape(self) -> tuple:
        return (self.size,) * self.n

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def ncells(self) -> int:
        return self.size ** self.n

    @property
    def spatial_axes(self) -> tuple:
        return tuple(range(-self.n, 0))

    @cached_property
    def cell_centers(self) -> np.ndarray:
        """Cell-center coordinates, shape ``(n, *shape)``."""
        ticks = (np.arange(self.size) + 0.5) * self.h
        return np.stack(np.meshgrid(*([ticks] * self.n), indexing="ij"))

    def check_resolution(self, m: int) -> None:
        if self.N % m:
            raise ConfigError(
                f"coefficient resolution m={m} must divide grid resolution N={self.N}")

    def subcell_index(self, m: int) -> tuple:
        """Index arrays mapping every grid cell to its coefficient subcell."""
        self.check_resolution(m)
        idx = (np.arange(self.size) * m // self.N) % m
        return tuple(np.meshgrid(*([idx] * self.n), indexing="ij"))

    # -- discrete operators -------------------------------------------------

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Forward differences, averaged over the 2^(n-1) edges of each cell."""
        u = np.asarray(u, dtype=float)
        axes = self.spatial_axes
        out = np.empty(u.shape[:1] + (self.n,) + u.shape[1:])
        for k, ax in enumerate(axes):
            g = (np.roll(u, -1, axis=ax) - u) / self.h
            for ax_l in axes:
                if ax_l != ax:
                    g = 0.5 * (g + np.roll(g, -1, axis=ax_l))
            out[:, k] = g
        return out

    def divergence(self, W: np.ndarray) -> np.ndarray:
        """Negative adjoint of :meth:`gradient` for the plain sum inner product."""
        W = np.asarray(W, dtype=float)
        axes = self.spatial_axes
        out = np.zeros(W.shape[:1] + W.shape[2:])
        for k, ax in enumerate(axes):
            g = W[:, k]
            for ax_l in axes:
                if ax_l != ax:
                    g = 0.5 * (g + np.roll(g, 1, axis=ax_l))
            out -= (np.roll(g, 1, axis=ax) - g) / self.h
        return out

    def mean(self, W: np.ndarray) -> np.ndarray:
        return np.asarray(W, dtype=float).mean(axis=self.spatial_axes)

    @cached_property
    def _symbols(self):
        # Fourier multipliers of the gradient on the rfftn frequency grid.
        L = self.size
        freqs = [2 * np.pi * np.fft.fftfreq(L)] * (self.n - 1) + [2 * np.pi * np.fft.rfftfreq(L)]
        xi = np.meshgrid(*freqs, indexing="ij")
        shifts = [np.exp(1j * x) for x in xi]
        g = []
        for k in range(self.n):
            s = (shifts[k] - 1.0) / self.h
            for l in range(self.n):
                if l != k:
                    s = s * 0.5 * (1.0 + shifts[l])
            g.append(s)
        g = np.stack(g)
        denom = np.sum(np.abs(g) ** 2, axis=0)
        # kernel of D^T D: constants and, for n > 1, the checkerboard mode
        kernel = denom < 1e-12 * denom.max()
        inv = np.where(kernel, 0.0, 1.0 / np.where(kernel, 1.0, denom))
        return g, inv

    def project_to_gradients(self, W: np.ndarray, method: str = "fft",
                             tol: float = 1e-10, maxiter: int | None = None):
        """Least-squares projection of ``W`` onto discrete periodic gradients.

        Returns ``(u, G)`` with ``G = gradient(u)`` and ``u`` of zero mean.
        ``method="fft"`` diagonalizes the periodic normal equations exactly;
        ``method="cg"`` solves them with conjugate gradients.
        """
        W = np.asarray(W, dtype=float)
        if method == "fft":
            u = self._solve_fft(W)
        elif method == "cg":
            u = self._solve_cg(W, tol, maxiter)
        else:
            raise ValueError(f"unknown projection method {method!r}")
        return u, self.gradient(u)

    def _solve_fft(self, W):
        g, inv = self._symbols
        axes = self.spatial_axes
        What = np.fft.rfftn(W, axes=axes)
        Uhat = np.sum(np.conj(g)[None] * What, axis=1) * inv
        return np.fft.irfftn(Uhat, s=self.shape, axes=axes)

    def _solve_cg(self, W, tol, maxiter):
        nc = self.ncells
        maxiter = maxiter if maxiter is not None else 10 * nc

        def normal_op(x):
            v = x.reshape((1,) + self.shape)
            return -self.divergence(self.gradient(v)).ravel()

        A = LinearOperator((nc, nc), matvec=normal_op, dtype=float)
        rhs = -self.divergence(W)
        u = np.empty_like(rhs)
        for i in range(W.shape[0]):
            b = rhs[i].ravel()
            bnorm = np.linalg.norm(b)
            if bnorm == 0.0:
                u[i] = 0.0
                continue
            x, _ = cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter)
            res = np.linalg.norm(normal_op(x) - b) / bnorm
            if res > 10 * tol:
                raise SolverError(
                    f"CG projection stalled at relative residual {res:.3e}", residual=res)
            u[i] = x.reshape(self.shape)
        return u - u.mean(axis=self.spatial_axes, keepdims=True)


def dump_field_csv(path, field: np.ndarray, grid: CellGrid) -> None:
    """Write a node or cell field as rows ``(index..., components...)``."""
    field = np.asarray(field)
    comps = field.reshape((-1,) + grid.shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{k}" for k in range(grid.n)] + [f"c{k}" for k in range(comps.shape[0])])
        for idx in product(range(grid.size), repeat=grid.n):
            w.writerow(list(idx) + [repr(float(v)) for v in comps[(slice(None),) + idx]])
