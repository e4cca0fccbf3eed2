import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab import drifts as dm
from driftlab import operators as op
from driftlab import semigroup as sg
from driftlab import spectral as sp
from driftlab.results import DomainError
from driftlab.spectral import Grid


@pytest.fixture(scope="module")
def free16():
    g = Grid(3, 16, 4.0)
    return g, op.make_generator(dm.Identity(), None, g)


def _heat(g, f, t):
    return sp.apply_symbol(g, f, np.exp(-t * g.k2))


@pytest.mark.parametrize("scheme", sg.SCHEMES)
def test_mass_conserved_free(free16, scheme):
    g, L = free16
    f = np.exp(-g.radius ** 2)
    run = sg.evolve(L, f, 0.5, 8, scheme)
    assert run.u.sum() == pytest.approx(f.sum(), rel=1e-12)


@given(t=st.floats(0.05, 1.0), n=st.integers(1, 6))
def test_semigroup_law(t, n):
    g = Grid(3, 8, 3.0)
    L = op.make_generator(dm.Identity(), None, g)
    f = np.exp(-g.radius ** 2)
    whole = sg.evolve(L, f, 2 * t, 2 * n).u
    half = sg.evolve(L, sg.evolve(L, f, t, n).u, t, n).u
    assert np.allclose(whole, half, atol=1e-13)


@pytest.mark.parametrize("scheme,order", [("backward_euler", 1.0), ("crank_nicolson", 2.0)])
def test_time_order(free16, scheme, order):
    g, L = free16
    f = np.exp(-g.radius ** 2)
    ref = _heat(g, f, 0.5)
    errs = [np.abs(sg.evolve(L, f, 0.5, n, scheme).u - ref).max() for n in (8, 16, 32)]
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(abs(r - order) < 0.15 for r in rates)


def test_iterative_path_matches_exact(free16):
    g, _ = free16
    L = op.make_generator(dm.Identity(), np.zeros((3,) + g.shape), g)
    f = np.exp(-g.radius ** 2)
    Lf = op.make_generator(dm.Identity(), None, g)
    a = sg.evolve(L, f, 0.3, 4).u
    b = sg.evolve(Lf, f, 0.3, 4).u
    assert np.abs(a - b).max() < 1e-8


def test_upwind_positivity():
    g = Grid(3, 16, 4.0)
    L = op.make_generator(dm.Identity(), dm.MollifiedHardy(0.5, 0.05, -1), g, scheme="upwind")
    f = np.exp(-g.radius ** 2 / 0.5)
    run = sg.evolve(L, f, 0.2, 4, solver_tol=1e-12)
    assert run.positivity_min >= -1e-9


def test_free_contraction_all_r(free16):
    g, L = free16
    f = np.exp(-g.radius ** 2)
    run = sg.evolve(L, f, 0.5, 8, record=(1.0, 2.0, math.inf))
    for r, norms in run.recorded_norms.items():
        assert all(b <= a * (1 + 1e-9) for a, b in zip(norms, norms[1:])), r


def test_growth_rate_exponential():
    t = [0.0, 0.5, 1.0, 2.0]
    assert sg.growth_rate(t, [math.exp(0.3 * s) for s in t]) == pytest.approx(0.3)


def test_smoothing_slope_free():
    g = Grid(3, 32, 8.0)
    L = op.make_generator(dm.Identity(), None, g)
    res = sg.smoothing_exponent_fit(L, 1.0, math.inf, [1.0, 2.0, 4.0], slack=0.1)
    assert res.passed
    assert res.predicted["slope"] == pytest.approx(-1.5)


def test_smoothing_window_checked():
    g = Grid(3, 16, 4.0)
    L = op.make_generator(dm.Identity(), None, g)
    with pytest.raises(DomainError):
        sg.smoothing_exponent_fit(L, 2.0, math.inf, [1e-4, 0.1])


def test_nash_constant_stable():
    g = Grid(3, 16, 4.0)
    samples = [lambda gg, s=s: np.exp(-gg.radius ** 2 / s) for s in (0.5, 1.0)]
    res = sg.nash_check(samples, g, rel_tol=0.05)
    assert res.passed


@given(s=st.floats(0.8, 1.4))
def test_nash_quotient_dilation_invariant(s):
    # invariant under h(x) -> h(x/s) up to discretization
    g = Grid(3, 32, 6.0)
    a = sg.nash_quotient(np.exp(-g.radius ** 2), g)
    b = sg.nash_quotient(np.exp(-(g.radius / s) ** 2), g)
    assert a == pytest.approx(b, rel=1e-3)


@pytest.mark.parametrize("kw", [{"scheme": "rk4"}, {"steps": 0}, {"t_final": -1.0}])
def test_evolve_validation(free16, kw):
    g, L = free16
    args = {"t_final": 0.1, "steps": 2, "scheme": "backward_euler", **kw}
    with pytest.raises(DomainError):
        sg.evolve(L, np.ones(g.shape), **args)


def test_truncation_family_converges():
    g = Grid(3, 16, 4.0)
    b = dm.sample_drift(dm.Hardy(0.5, 1), g)

    def family(n):
        return op.make_generator(dm.Identity(), dm.truncate(b, dm.Identity(), n), g)

    f = np.exp(-g.radius ** 2 / 0.5)
    res = sg.drift_approximation_convergence(family, f, 0.25, [1, 2, 4], steps=4, min_ratio=1.0)
    assert res.passed
