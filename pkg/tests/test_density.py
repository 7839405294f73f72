import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from suphom.density import (PeriodicDensity, SublevelSet, check_growth, check_level_convexity,
                            growth_samples, psi, psi_level_radius, random_pairs)
from suphom.errors import (ConfigError, InfeasibleLevelError, NotLevelConvexError,
                           UnsupportedOperationError)
from suphom.grid import CellGrid
from suphom.sets import matrix_norm, project_ball

finite = st.floats(-50, 50, allow_nan=False)


def test_eval_examples(harmonic):
    unit = PeriodicDensity.coeff_norm([1.0], n=2, d=2)
    Z = np.array([[1.5, 0.0], [0.0, 1.0]])
    assert unit.eval([0.3, 0.7], Z) == pytest.approx(2.5)
    assert PeriodicDensity.coeff_psi([1.0]).eval(0.2, 2.0) == pytest.approx(3.0)
    assert harmonic.eval(0.75, 3.0) == pytest.approx(6.0)
    assert harmonic.eval(0.25, -3.0) == pytest.approx(3.0)


def test_row_sum_norm():
    Z = np.array([[3.0, 4.0], [0.0, -1.0]])
    assert matrix_norm(Z) == pytest.approx(6.0)


@given(i=st.integers(0, 1023), k=st.integers(-5, 5), z=finite)
def test_periodicity(i, k, z):
    # dyadic points keep x + k exact in floating point
    dens = PeriodicDensity.coeff_psi([1.0, 3.0, 2.0, 5.0])
    x = i / 1024
    assert dens.eval(x + k, z) == dens.eval(x, z)


def test_sublevel_examples():
    dens = PeriodicDensity.coeff_norm([2.0])
    assert dens.sublevel(0.1, 1.0).radius == pytest.approx(0.5)
    ps = PeriodicDensity.coeff_psi([1.0])
    assert ps.sublevel(0.1, 3.0).radius == pytest.approx(2.0)
    assert ps.sublevel(0.1, 1.0).radius == pytest.approx(1.0)
    assert ps.sublevel(0.1, 0.5).is_empty
    with pytest.raises(ValueError):
        dens.sublevel(0.1, -1.0)


def test_psi_level_radius_inverts_psi():
    r = np.linspace(1.0, 40.0, 200)
    assert np.allclose(psi(psi_level_radius(r)), r, atol=1e-12)


@settings(max_examples=200)
@given(x=st.floats(0, 1, exclude_max=True), M=st.floats(0, 20), z=finite,
       form=st.sampled_from(["coeff_norm", "coeff_psi"]))
def test_sublevel_consistency(x, M, z, form):
    dens = getattr(PeriodicDensity, form)([1.0, 2.5])
    S = dens.sublevel(x, M)
    f = dens.eval(x, z)
    if abs(f - M) > 1e-9:
        assert S.contains(z) == (f <= M)


@given(x=st.floats(0, 1, exclude_max=True), M1=st.floats(0, 20), dM=st.floats(0, 20))
def test_sublevel_nested(x, M1, dM):
    dens = PeriodicDensity.coeff_psi([1.0, 2.5])
    r1 = dens.sublevel(x, M1)
    r2 = dens.sublevel(x, M1 + dM)
    if not r1.is_empty:
        assert not r2.is_empty and r2.radius >= r1.radius


def test_projection_examples(harmonic):
    assert harmonic.project_to_sublevel(0.25, 1.0, 3.0).item() == pytest.approx(1.0)
    assert harmonic.project_to_sublevel(0.25, 1.0, -0.3).item() == pytest.approx(-0.3)
    P = harmonic.project_to_sublevel(0.75, 1.0, 2.0)
    assert np.array_equal(harmonic.project_to_sublevel(0.75, 1.0, P), P)
    with pytest.raises(InfeasibleLevelError):
        PeriodicDensity.coeff_psi([1.0]).project_to_sublevel(0.1, 0.5, 1.0)


def test_projection_variational(rng):
    # <W - P, V - P> <= 0 for every V in the set, also for the l1/l2 ball with d > 1
    for d, n in [(1, 1), (1, 3), (2, 2), (3, 2)]:
        dens = PeriodicDensity.coeff_norm([1.5], n=n, d=d)
        for _ in range(20):
            W = rng.normal(scale=3, size=(d, n))
            P = dens.project_to_sublevel(np.zeros(n), 2.0, W)
            assert matrix_norm(P) <= 2.0 / 1.5 + 1e-12
            assert np.allclose(dens.project_to_sublevel(np.zeros(n), 2.0, P), P)
            for _ in range(20):
                V = rng.normal(size=(d, n))
                V *= rng.uniform(0, 2.0 / 1.5) / matrix_norm(V)
                assert np.sum((W - P) * (V - P)) <= 1e-10
                assert np.linalg.norm(W - P) <= np.linalg.norm(W - V) + 1e-12


def test_projection_matches_direct_minimization(rng):
    from scipy.optimize import minimize

    W = rng.normal(scale=2, size=(3, 2))
    P = project_ball(W, 1.0)
    cons = {"type": "ineq", "fun": lambda v: 1.0 - matrix_norm(v.reshape(3, 2))}
    res = minimize(lambda v: np.sum((v - W.ravel()) ** 2), np.zeros(6), constraints=[cons],
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    assert np.allclose(P.ravel(), res.x, atol=1e-5)


def test_level_convexity_builtin(rng):
    for dens in (PeriodicDensity.coeff_norm([1.0, 2.0], n=1, d=2),
                 PeriodicDensity.coeff_psi([1.0, 2.0], n=1, d=2)):
        rep = check_level_convexity(dens, [0.3], random_pairs(rng, 2, 1, 1000))
        assert rep.passed and rep.checked == 1000


def _two_wells():
    return PeriodicDensity.custom(lambda x, Z: min(abs(Z.item() - 1), abs(Z.item() + 1)),
                                  lambda x, M, W: W, alpha=0.1, beta=1.0)


def test_level_convexity_counterexample():
    dens = _two_wells()
    rep = check_level_convexity(dens, [0.5], [(np.array([[1.0]]), np.array([[-1.0]]), 0.5)])
    assert len(rep.violations) == 1
    assert rep.violations[0]["f_mid"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        check_level_convexity(dens, [0.5], [(1.0, -1.0, 1.0)])


def test_custom_density_gating():
    dens = _two_wells()
    assert not dens.level_convex
    assert dens.eval(0.3, 0.0) == pytest.approx(1.0)
    with pytest.raises(NotLevelConvexError):
        dens.require_solvable()
    with pytest.raises(UnsupportedOperationError):
        dens.sublevel(0.3, 1.0)

    ok = PeriodicDensity.custom(lambda x, Z: 2.0 * abs(Z.item()),
                                lambda x, M, W: np.clip(W, -M / 2, M / 2), alpha=2.0, beta=2.0)
    assert ok.level_convex
    with pytest.raises(ConfigError):
        PeriodicDensity(n=1, d=1, form="custom", coeff=[1.0], alpha=1, beta=1, eval_fn=abs)


def test_growth_checks(rng):
    dens = PeriodicDensity.coeff_norm([1.0, 2.0], alpha=1.0, beta=2.0)
    assert check_growth(dens, growth_samples(rng, dens, 300)).passed
    ps = PeriodicDensity.coeff_psi([1.0], alpha=0.5, beta=3.0)
    rep = check_growth(ps, growth_samples(rng, ps, 300, zmax=10.0))
    assert rep.passed and rep.lower_slack >= 0 and rep.upper_slack >= 0
    bad = PeriodicDensity.coeff_norm([1.0], alpha=5.0, beta=5.0)
    rep = check_growth(bad, [(np.array([0.2]), np.array([[1.0]]))])
    assert not rep.passed
    assert rep.failures[0]["f"] == pytest.approx(1.0) and rep.failures[0]["lower"] == pytest.approx(5.0)


def test_config_round_trip():
    doc = {"n": 2, "d": 1, "form": "coeff_psi", "coeff": {"m": 2, "values": [1, 1, 2, 2]},
           "alpha": 1.0, "beta": 6.0}
    dens = PeriodicDensity.from_config(doc)
    assert dens.coefficient([0.7, 0.1]) == 2.0 and dens.coefficient([0.2, 0.9]) == 1.0
    assert PeriodicDensity.from_config(dens.to_config()).to_config() == dens.to_config()


@pytest.mark.parametrize("doc", [
    {"n": 1, "d": 1, "form": "coeff_norm", "coeff": {"m": 2, "values": [1, 2, 3]}},
    {"n": 1, "d": 1, "form": "coeff_norm", "coeff": {"m": 2, "values": [1, -2]}},
    {"n": 1, "d": 1, "form": "wavy", "coeff": {"m": 1, "values": [1]}},
    {"n": 1, "d": 1, "form": "coeff_norm"},
    {"n": 1, "d": 1, "form": "coeff_norm", "coeff": {"m": 1, "values": [1]}, "alpha": -1},
])
def test_malformed_configs(doc):
    with pytest.raises(ConfigError):
        PeriodicDensity.from_config(doc)


def test_cell_eval_gradient(rng):
    grid = CellGrid(2, 1, 8)
    for dens in (PeriodicDensity.coeff_norm([[1.0, 2.0], [3.0, 1.5]], n=2, d=2),
                 PeriodicDensity.coeff_psi([[1.0, 2.0], [3.0, 1.5]], n=2, d=2)):
        V = rng.normal(size=(2, 2) + grid.shape)
        f, df = dens.cell_eval(grid, V, smoothing=1e-3, with_grad=True)
        dV = rng.normal(size=V.shape)
        eps = 1e-6
        fd = (dens.cell_eval(grid, V + eps * dV, 1e-3) - dens.cell_eval(grid, V - eps * dV, 1e-3)) / (2 * eps)
        assert np.allclose(fd, np.sum(df * dV, axis=(0, 1)), rtol=1e-5, atol=1e-7)


def test_cell_eval_matches_pointwise(rng):
    grid = CellGrid(2, 1, 4)
    dens = PeriodicDensity.coeff_psi([[1.0, 2.0], [3.0, 1.5]], n=2, d=2)
    V = rng.normal(scale=2, size=(2, 2) + grid.shape)
    f = dens.cell_eval(grid, V)
    for i in range(4):
        for k in range(4):
            assert f[i, k] == pytest.approx(dens.eval(grid.cell_centers[:, i, k], V[..., i, k]))


def test_sublevel_set_box():
    S = SublevelSet("box", lo=np.array([[-1.0, 0.0]]), hi=np.array([[1.0, 2.0]]))
    assert S.contains([[0.5, 1.0]]) and not S.contains([[0.5, 3.0]])
    assert np.allclose(S.project([[2.0, -1.0]]), [[1.0, 0.0]])
