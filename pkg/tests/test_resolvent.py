import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab import drifts as dm
from driftlab import operators as op
from driftlab import resolvent as rv
from driftlab import spectral as sp
from driftlab.results import DomainError, InapplicableError
from driftlab.spectral import Grid


@pytest.fixture(scope="module")
def setup():
    g = Grid(3, 16, 4.0)
    b = dm.sample_drift(dm.MollifiedHardy(0.2, 0.05, 1), g)
    f = np.exp(-g.radius ** 2) * (1 + 0.3 * g.coords[0])
    return g, b, f


@pytest.mark.parametrize("method", ["hille_lions", "weak_factor", "theta_r"])
@pytest.mark.parametrize("zeta", [1.0, 1.0 + 1.0j])
def test_routes_agree_with_direct(setup, method, zeta):
    g, b, f = setup
    L = op.make_generator(dm.Identity(), b, g)
    u0 = rv.solve_direct(rv.ResolventPlan("direct", zeta, solver_tol=1e-8), L, f)
    u = rv.resolve(rv.ResolventPlan(method, zeta, solver_tol=1e-8), b, f, g)
    assert np.linalg.norm(u - u0) / np.linalg.norm(u0) < 1e-6


def test_direct_residual(setup):
    g, b, f = setup
    L = op.make_generator(dm.Identity(), b, g)
    info = rv.SolveInfo()
    u = rv.solve_direct(rv.ResolventPlan("direct", 2.0, solver_tol=1e-9), L, f, info)
    assert np.linalg.norm(2.0 * u + L(u) - f) <= 1e-9 * np.linalg.norm(f)
    assert info.residual <= 1e-9


def test_free_resolvent_is_bessel_multiplier(setup):
    g, _, f = setup
    u = rv.resolve(rv.ResolventPlan("direct", 1.5, solver_tol=1e-10), None, f, g)
    assert np.allclose(u, sp.bessel_apply(g, f, 1.5, 1.0), atol=1e-9)


@pytest.mark.parametrize("shift", [0.0, 0.5, 1.0])
def test_weak_identity_residual(setup, shift):
    # resolved Gaussians; Nyquist modes separate -Delta from grad.grad
    g, b, _ = setup
    f = np.exp(-g.radius ** 2)
    h = np.exp(-g.radius ** 2 / 2) * (1 + g.coords[0] - shift * g.coords[1])
    assert rv.weak_identity_residual(b, f, h, g) < 1e-12


def test_pseudo_resolvent_audit(setup):
    g, b, _ = setup

    def route(z, h):
        return rv.resolve(rv.ResolventPlan("weak_factor", z, solver_tol=1e-10), b, h, g)

    res = rv.pseudo_resolvent_audit(route, [1.0, 2.0 + 1.0j], op.smooth_samples(g, 1, 3), 2e-5)
    assert res.passed


def test_approach_to_identity_free(setup):
    g, _, f = setup
    res = rv.approach_to_identity("direct", None, f, [1.0, 4.0, 16.0, 64.0], g)
    assert res.passed
    assert res.measured["slope_gap"] < -0.5


def test_hs_and_tr_probes_below_bounds(setup):
    from driftlab import constants as cst
    from driftlab import formbound as fb
    g, b, _ = setup
    dw = fb.estimate_delta_weak(b, 1.0).delta_hat
    assert rv.hs_norm_probe(b, 1.0).value <= dw + 0.05
    assert rv.tr_norm_probe(b, 1.0, 2.0).value <= cst.m_d(3) * cst.c_r(2.0) * dw + 0.1


@pytest.mark.parametrize("kw", [{"method": "nope"}, {"solver_tol": 1e-2}, {"zeta": -1.0}])
def test_plan_validation(kw):
    with pytest.raises(DomainError):
        rv.ResolventPlan(**kw)


def test_theta_r_rejects_r_outside_interval(setup):
    g, b, f = setup
    with pytest.raises(DomainError):
        rv.resolve(rv.ResolventPlan("theta_r", 1.0, r=50.0), b, f, g)


def test_factorized_route_needs_periodic():
    g = Grid(3, 8, 2.0, "dirichlet")
    b = np.zeros((3,) + g.shape)
    with pytest.raises(DomainError):
        rv.hille_lions_resolvent(1.0, b, np.ones(g.shape), g)


def test_one_plus_inapplicable_without_krylov():
    w = np.ones(4)
    with pytest.raises(InapplicableError):
        rv.solve_one_plus(lambda v: 1.5 * v, w, 1e-8, 100, krylov=False)


def test_one_plus_krylov_fallback():
    w = np.ones(4)
    info = rv.SolveInfo()
    v = rv.solve_one_plus(lambda v: 1.5 * v, w, 1e-10, 200, krylov=True, info=info)
    assert info.inner == "gmres"
    assert np.allclose(v, w / 2.5, atol=1e-8)


@given(q=st.floats(0.0, 0.8))
def test_one_plus_fixed_point(q):
    w = np.array([1.0, -2.0, 0.5])
    v = rv.solve_one_plus(lambda x: q * x, w, 1e-10, 500)
    assert np.allclose(v, w / (1 + q), atol=1e-8)


@given(s=st.floats(0.1, 2.0))
def test_b_power_magnitude(s):
    b = np.array([[3.0, 0.0], [4.0, 0.0]])
    out = rv.b_power(b, s)
    assert np.sqrt(np.sum(out ** 2, axis=0))[0] == pytest.approx(5.0 ** s)
    assert out[:, 1].tolist() == [0.0, 0.0]
