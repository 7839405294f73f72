import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suphom.errors import ConfigError, SolverError
from suphom.grid import CellGrid, dump_field_csv

GRIDS = [CellGrid(1, 1, 16), CellGrid(1, 3, 8), CellGrid(2, 1, 8), CellGrid(2, 2, 6), CellGrid(3, 1, 4)]


def _rand_node(rng, grid, d=2):
    return rng.normal(size=(d,) + grid.shape)


def _rand_cell(rng, grid, d=2):
    return rng.normal(size=(d, grid.n) + grid.shape)


def test_construction_rejects_degenerate():
    for args in [(1, 1, 1), (0, 1, 8), (1, 0, 8)]:
        with pytest.raises(ConfigError):
            CellGrid(*args)
    g = CellGrid(2, 3, 8)
    assert g.shape == (24, 24) and g.ncells == 576 and g.h == pytest.approx(1 / 8)
    with pytest.raises(ConfigError):
        g.check_resolution(3)


def test_subcell_index_never_straddles():
    g = CellGrid(1, 2, 12)
    idx = g.subcell_index(3)[0]
    centers = g.cell_centers[0]
    assert np.array_equal(idx, np.floor(np.mod(centers, 1.0) * 3).astype(int))


@pytest.mark.parametrize("grid", GRIDS, ids=str)
def test_gradient_of_constant_and_mean(grid, rng):
    assert np.allclose(grid.gradient(np.full((2,) + grid.shape, 3.7)), 0.0)
    G = grid.gradient(_rand_node(rng, grid))
    assert np.abs(grid.mean(G)).max() < 1e-13


def test_gradient_truncation_1d():
    errs = []
    for N in (64, 128):
        g = CellGrid(1, 1, N)
        x = np.arange(N) / N
        G = g.gradient(np.sin(2 * np.pi * x)[None])[0, 0]
        exact = 2 * np.pi * np.cos(2 * np.pi * (x + 0.5 / N))
        errs.append(np.abs(G - exact).max() * N ** 2)
    assert max(errs) <= 1.0 * (2 * np.pi) ** 3 / 24 * 1.01
    assert errs[1] == pytest.approx(errs[0], rel=1e-2)


@pytest.mark.parametrize("grid", GRIDS, ids=str)
def test_adjointness(grid, rng):
    for _ in range(3):
        u, W = _rand_node(rng, grid), _rand_cell(rng, grid)
        lhs = np.sum(grid.gradient(u) * W)
        rhs = -np.sum(u * grid.divergence(W))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_mean_examples(rng):
    g = CellGrid(2, 1, 4)
    Z0 = rng.normal(size=(1, 2))
    W = np.broadcast_to(Z0[..., None, None], (1, 2) + g.shape)
    assert np.allclose(g.mean(W), Z0)
    A, B = _rand_cell(rng, g), _rand_cell(rng, g)
    assert np.allclose(g.mean(A + B), g.mean(A) + g.mean(B))


@pytest.mark.parametrize("method", ["fft", "cg"])
@pytest.mark.parametrize("grid", GRIDS, ids=str)
def test_projection_properties(grid, method, rng):
    u0 = _rand_node(rng, grid)
    G0 = grid.gradient(u0)
    u, G = grid.project_to_gradients(G0, method=method)
    assert np.abs(G - G0).max() < 1e-10
    assert np.abs(u.mean(axis=grid.spatial_axes)).max() < 1e-12

    Z0 = np.broadcast_to(rng.normal(size=(2, grid.n))[(...,) + (None,) * grid.n], G0.shape)
    assert np.abs(grid.project_to_gradients(Z0, method=method)[1]).max() < 1e-10

    W = _rand_cell(rng, grid)
    u, G = grid.project_to_gradients(W, method=method)
    assert np.abs(grid.project_to_gradients(G, method=method)[1] - G).max() < 1e-10
    for _ in range(10):
        v = _rand_node(rng, grid)
        assert abs(np.sum((W - G) * grid.gradient(v))) < 1e-9


@pytest.mark.parametrize("grid", GRIDS, ids=str)
def test_fft_and_cg_agree(grid, rng):
    W = _rand_cell(rng, grid)
    u1, G1 = grid.project_to_gradients(W, method="fft")
    u2, G2 = grid.project_to_gradients(W, method="cg", tol=1e-12)
    assert np.abs(G1 - G2).max() < 1e-8


def test_projection_is_least_squares(rng):
    grid = CellGrid(2, 1, 6)
    W = _rand_cell(rng, grid, d=1)
    u, G = grid.project_to_gradients(W)
    best = np.sum((W - G) ** 2)
    for _ in range(20):
        v = rng.normal(scale=0.1, size=u.shape)
        assert np.sum((W - grid.gradient(u + v)) ** 2) >= best - 1e-12


def test_cg_failure_reports_residual(rng):
    grid = CellGrid(2, 1, 16)
    with pytest.raises(SolverError) as info:
        grid.project_to_gradients(_rand_cell(rng, grid), method="cg", maxiter=2)
    assert info.value.residual > 1e-9


def test_unknown_projection_method(rng):
    with pytest.raises(ValueError):
        CellGrid(1, 1, 4).project_to_gradients(np.zeros((1, 1, 4)), method="lu")


@settings(max_examples=25, deadline=None)
@given(shift=st.integers(0, 11), axis=st.integers(0, 1), seed=st.integers(0, 2 ** 16))
def test_translation_equivariance(shift, axis, seed):
    grid = CellGrid(2, 1, 12)
    W = np.random.default_rng(seed).normal(size=(1, 2) + grid.shape)
    _, G = grid.project_to_gradients(W)
    _, Gs = grid.project_to_gradients(np.roll(W, shift, axis=2 + axis))
    assert np.abs(Gs - np.roll(G, shift, axis=2 + axis)).max() < 1e-10


def test_dump_field_csv(tmp_path, rng):
    grid = CellGrid(2, 1, 3)
    u = rng.normal(size=(1,) + grid.shape)
    path = tmp_path / "u.csv"
    dump_field_csv(path, u, grid)
    lines = path.read_text().splitlines()
    assert lines[0] == "i0,i1,c0" and len(lines) == 10
    i0, i1, c0 = lines[5].split(",")
    assert float(c0) == u[0, int(i0), int(i1)]
