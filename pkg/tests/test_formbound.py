import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab import drifts as dm
from driftlab import formbound as fb
from driftlab.results import DomainError, NumericalError
from driftlab.spectral import Grid, VectorField


def _const(grid, vec):
    return dm.sample_drift(dm.Constant(tuple(vec)), grid)


def test_power_iteration_diagonal(rng):
    lam = np.array([3.0, 1.0, 0.5, 0.1])
    pr = fb.power_iteration(lambda x: lam * x, rng.standard_normal(4) + 1, tol=1e-13)
    assert pr.value == pytest.approx(3.0, rel=1e-10)


def test_power_iteration_stagnation_raises():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(NumericalError):
        fb.power_iteration(lambda x: rot @ x * (1 + 1e-3 * x[0]), np.array([1.0, 0.3]), max_iter=5)


@pytest.mark.parametrize("boundary", ["periodic"])
@given(e=st.floats(0.1, 3.0), lam=st.floats(0.1, 4.0))
def test_strong_constant_drift_closed_form(boundary, e, lam):
    # sup_k |e|^2/(lam + k^2) = |e|^2/lam, attained by the constant mode
    g = Grid(3, 8, 2.0, boundary)
    rep = fb.estimate_delta_strong(_const(g, (e, 0, 0)), dm.Identity(), lam)
    assert rep.delta_hat == pytest.approx(e * e / lam, rel=1e-7)


@given(e=st.floats(0.1, 3.0), lam=st.floats(0.1, 4.0))
def test_weak_constant_drift_closed_form(e, lam):
    g = Grid(3, 8, 2.0)
    rep = fb.estimate_delta_weak(_const(g, (0, e, 0)), lam)
    assert rep.delta_hat == pytest.approx(e / math.sqrt(lam), rel=1e-7)


def test_generalized_route_constant_drift():
    # finite-volume A also has the constant mode with eigenvalue 0
    g = Grid(3, 8, 2.0)
    rep = fb.estimate_delta_strong(_const(g, (1.0, 0, 0)), dm.DiagonalKappa(0.0, 1.0), 0.5)
    assert rep.delta_hat == pytest.approx(2.0, rel=1e-6)


@given(s=st.floats(0.2, 5.0))
def test_homogeneity(s):
    g = Grid(3, 16, 3.0)
    b = dm.sample_drift(dm.MollifiedHardy(0.3, 0.1, 1), g)
    bs = VectorField(g, s * b.components)
    d1 = fb.estimate_delta_strong(b, dm.Identity(), 1.0).delta_hat
    d2 = fb.estimate_delta_strong(bs, dm.Identity(), 1.0).delta_hat
    w1 = fb.estimate_delta_weak(b, 1.0).delta_hat
    w2 = fb.estimate_delta_weak(bs, 1.0).delta_hat
    assert d2 == pytest.approx(s * s * d1, rel=1e-6)
    assert w2 == pytest.approx(s * w1, rel=1e-6)


def test_monotone_in_lambda():
    g = Grid(3, 16, 3.0)
    b = dm.sample_drift(dm.Hardy(0.5, 1), g)
    vals = [fb.estimate_delta_strong(b, dm.Identity(), lam).delta_hat for lam in (4.0, 1.0, 0.25)]
    assert vals[0] < vals[1] < vals[2]


def test_hardy_strong_increases_under_refinement():
    vals = []
    for n in (16, 32):
        g = Grid(3, n, 4.0, "dirichlet")
        b = dm.sample_drift(dm.Hardy(0.5, 1), g)
        vals.append(fb.estimate_delta_strong(b, dm.Identity(), 1e-3).delta_hat)
    assert vals[0] < vals[1] < 1.0 * 1.05


def test_kato_constant_drift():
    # int of the (lam - Delta)^(-1/2) kernel is lam^(-1/2)
    g = Grid(3, 32, 8.0)
    rep = fb.kato_norm(_const(g, (1.0, 0, 0)), 1.0)
    assert rep.delta_hat == pytest.approx(1.0, rel=0.05)


def test_kato_needs_periodic():
    g = Grid(3, 8, 2.0, "dirichlet")
    with pytest.raises(DomainError):
        fb.kato_norm(_const(g, (1.0, 0, 0)), 1.0)


def test_inclusion_audit_passes(grid32):
    b = dm.sample_drift(dm.MollifiedHardy(0.3, 0.05, 1), grid32)
    f = dm.sample_drift(dm.Constant((0.1, 0.0, 0.0)), grid32)
    res = fb.inclusion_audit(b, 1.0, f)
    assert res.passed, [c for c in res.checks if not c.passed]


def test_mollification_does_not_increase_delta(grid32):
    b = dm.sample_drift(dm.Hardy(0.4, 1), grid32)
    res = fb.mollification_stability(b, dm.Identity(), [0.01, 0.05, 0.2], 1.0)
    assert res.passed


def test_relative_bound_probe_below_bound(grid32):
    b = dm.sample_drift(dm.MollifiedHardy(0.2, 0.05, 1), grid32)
    C = fb.estimate_delta_strong(b, dm.Identity(), 1.0).delta_hat
    out = fb.relative_bound_probe(b, dm.Identity(), 1.0, 1.2, C, probes=8)
    assert out["passes"]


def test_rejects_nonpositive_lambda(grid16):
    b = _const(grid16, (1, 0, 0))
    with pytest.raises(DomainError):
        fb.estimate_delta_strong(b, dm.Identity(), 0.0)
    with pytest.raises(DomainError):
        fb.estimate_delta_weak(b, -1.0)
