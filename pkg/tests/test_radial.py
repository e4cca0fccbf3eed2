import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab import radial as rd
from driftlab.results import DomainError


@pytest.mark.parametrize("c,case,bounded", [(1.5, "drift", True), (0.5, "drift", False),
                                            (2.0, "matrix", True), (0.5, "matrix", False)])
def test_dirichlet_two_solutions(c, case, bounded):
    res = rd.dirichlet_two_solutions(c, 3, case)
    assert res.passed
    assert (res.measured["alpha"] > 0) == bounded


def test_degenerate_alpha_rejected():
    with pytest.raises(DomainError):
        rd.dirichlet_two_solutions(1.0, 3, "drift")


@given(c=st.floats(0.1, 2.5), d=st.integers(3, 6))
def test_power_solves_radial_equation(c, d):
    alpha = rd.power_alpha(c, d)
    g = rd.RadialGrid(1e-2, 1.0, 2048)
    u = g.rho ** alpha
    assert rd.scaled_residual(c, d, g, u) < 1e-3


@pytest.mark.parametrize("c", [0.0, 0.5, 2.0])
@pytest.mark.parametrize("d", [3, 5])
def test_hardy_constant_rayleigh(c, d):
    hist: list[float] = []
    q = rd.hardy_constant_rayleigh(c, d, history=hist)
    assert q == pytest.approx((1 + c) * (d - 2) ** 2 / 4.0, rel=0.02)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(hist, hist[1:]))


def test_hardy_constant_domain():
    with pytest.raises(DomainError):
        rd.hardy_constant_rayleigh(-1.5, 3)


def test_dilation_ratio_gaussian():
    # ||rho f'||/||f|| = sqrt(Gamma(7/2)/Gamma(3/2)) for f = e^(-rho^2), d = 3
    assert rd.dilation_ratio(lambda x: np.exp(-x * x), 3) == pytest.approx(math.sqrt(3.75), rel=1e-6)


@given(s=st.floats(0.2, 5.0))
def test_dilation_ratio_invariant(s):
    a = rd.dilation_ratio(lambda x: np.exp(-x * x), 3)
    b = rd.dilation_ratio(lambda x: np.exp(-(x / s) ** 2), 3)
    assert a == pytest.approx(b, rel=1e-6)


def test_dilation_inequality():
    samples = [lambda x: np.exp(-x * x), lambda x: 1 / (1 + x * x) ** 3]
    assert rd.dilation_inequality_check(samples, 3).passed


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5])
def test_im_counterexample(c):
    pred = 3 / c
    res = rd.im_counterexample(c, 3, 1.0, [pred - 0.5, pred + 0.5])
    assert res.passed
    assert res.measured["lp_threshold"] == pytest.approx(pred, abs=0.05)


def test_shell_exponent_power():
    # u = rho^a gives d + r a exactly
    assert rd.shell_exponent(lambda x: x ** -0.5, 2.0, 3, 1e-3) == pytest.approx(2.0, abs=1e-8)


@pytest.mark.parametrize("kw", [{"rho_min": 0.0}, {"points": 10}, {"log_spacing": False}])
def test_radial_grid_validation(kw):
    with pytest.raises(DomainError):
        rd.RadialGrid(**kw)


def test_refine_keeps_nodes():
    g = rd.RadialGrid(1e-3, 1.0, 65)
    assert np.allclose(g.refine().rho[::2], g.rho)
