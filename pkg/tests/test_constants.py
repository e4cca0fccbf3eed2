import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import gamma

from driftlab import constants as cst
from driftlab.results import DomainError

deltas = st.floats(min_value=1e-3, max_value=3.99, allow_nan=False)
dims = st.integers(min_value=3, max_value=12)


@pytest.mark.parametrize("d", range(3, 11))
def test_gamma_quotient_equals_two_over_d_minus_two(d):
    assert abs(cst.gamma_quotient(d) - 2.0 / (d - 2)) <= 1e-12


@pytest.mark.parametrize("d", [3, 4, 5, 7])
def test_m_d_formula_against_gamma_route(d):
    # direct gamma-free evaluation of pi^(1/2)(2e)^(-1/2) d^(d/2)(d-1)^(-(d-1)/2)
    ref = math.sqrt(math.pi / (2 * math.e)) * d ** (d / 2) / (d - 1) ** ((d - 1) / 2)
    assert cst.m_d(d) == pytest.approx(ref, rel=1e-14)


def test_m3_value():
    assert cst.m_d(3) == pytest.approx(1.9750, abs=5e-5)


@pytest.mark.parametrize("d", [3, 4, 6])
def test_m_d_star_against_beta_integral(d):
    # Gamma((d-2)/2)/Gamma((d-1)/2) sqrt(pi) = B((d-2)/2, 1/2)
    beta_int, _ = quad(lambda s: s ** ((d - 2) / 2 - 1) * (1 - s) ** -0.5, 0, 1, limit=200)
    assert cst.m_d_star(d) == pytest.approx(0.5 * (d - 2) * beta_int, rel=1e-9)


def test_m3_star_is_half_pi():
    assert abs(cst.m_d_star(3) - math.pi / 2) <= 1e-12


def test_weak_hardy_value_d3():
    assert cst.weak_sqrt_delta(3) ** 2 == pytest.approx(math.pi / 2, rel=1e-14)


@given(deltas, dims)
def test_threshold_identity(delta, d):
    # r_delta j = d/(-alpha) with alpha = c - (d-2), c = (d-2) sqrt(delta)/2
    rd = cst.r_delta(delta)
    th = cst.lr_threshold(cst.hardy_c(delta, d), d)
    assert rd * cst.sobolev_j(d) == pytest.approx(th, rel=1e-12)


@given(deltas, dims)
def test_contraction_interval_inside_bounded_interval(delta, d):
    rep = cst.intervals(delta, d)
    assert rep.I_m is not None and rep.I_m[0] <= rep.I_c[0]


@given(deltas, dims)
def test_d_in_contraction_interval_criterion(delta, d):
    rep = cst.intervals(delta, d)
    assert (rep.I_c[0] <= d) == (math.sqrt(delta) <= 2 * (d - 1) / d)


@given(st.floats(min_value=1e-3, max_value=2.0), dims)
def test_Is_empty_iff(delta, d):
    rep = cst.intervals(delta, d)
    assert (rep.I_s is None) == (cst.m_d(d) * delta >= 1)
    if rep.I_s is not None:
        lo, hi = rep.I_s
        assert lo < 2 < hi


@given(st.floats(min_value=0.01, max_value=50), dims)
def test_hardy_delta_round_trip(c, d):
    assert cst.hardy_c(cst.hardy_delta(c, d), d) == pytest.approx(c, rel=1e-12)


@given(st.floats(min_value=-0.9, max_value=20), st.integers(3, 8))
def test_matrix_delta_two_routes(c, d):
    alpha = cst.matrix_alpha(c, d)
    assert cst.matrix_c_from_alpha(alpha, d) == pytest.approx(c, rel=1e-10, abs=1e-10)
    assert cst.matrix_delta_from_c(c, d) == pytest.approx(cst.matrix_delta(alpha, d),
                                                          rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_matrix_alpha_root(c):
    a = cst.matrix_alpha(c, 3)
    assert (1 + c) * a * (a - 1) + 2 * a == pytest.approx(0.0, abs=1e-13)


@given(st.floats(min_value=1.01, max_value=100))
def test_conjugate_involution(r):
    assert cst.conjugate(cst.conjugate(r)) == pytest.approx(r, rel=1e-10)
    assert 1 / r + 1 / cst.conjugate(r) == pytest.approx(1.0)


@given(st.floats(min_value=1.05, max_value=30))
def test_varkappa_against_grid_sup(r):
    s = np.concatenate([[0.0], np.geomspace(1e-16, 1, 200001)])
    rp = cst.conjugate(r)
    f = (1 + s ** (1 / r)) * (1 + s ** (1 / rp)) / (1 + np.sqrt(s)) ** 2
    assert cst.varkappa(r) >= f.max() - 1e-12
    assert cst.varkappa(r) <= f.max() + 1e-6


@given(deltas, st.floats(min_value=0.1, max_value=10))
def test_omega_decreases_in_r(delta, lam):
    rd = cst.r_delta(delta)
    rs = [rd, rd + 1, 2 * rd + 3]
    om = [cst.omega_r(delta, lam, r) for r in rs]
    assert om[0] > om[1] > om[2] > 0


def test_r_delta_infinite_at_four():
    assert math.isinf(cst.r_delta(4.0))
    with pytest.raises(DomainError):
        cst.r_delta(-1.0)


@given(st.floats(1.5, 6.0), st.floats(2.05, 3.0))
def test_moser_closed_forms(r0, q):
    sched = cst.moser_schedule(r0, q, 3)
    assert sched.identity_error <= 1e-12
    assert sched.ok
    assert sched.gamma_seq[-1] == pytest.approx(sched.gamma, rel=1e-3)


def test_moser_rejects_t_below_one():
    with pytest.raises(DomainError):
        cst.moser_schedule(4.0, 2.5, 5)


def test_sum_rule_monotone():
    assert cst.sum_rule(0.0, 0.25) == pytest.approx(0.25)
    assert cst.sum_rule(0.0625, 0.0) == pytest.approx(0.25)
    assert cst.sum_rule(0.2, 0.1) > cst.sum_rule(0.1, 0.1)


@pytest.mark.parametrize("p,q,r", [(1, 2, 4), (1, 2, math.inf), (2, 3, 8)])
def test_extrapolate_exponent(p, q, r):
    beta, M = cst.extrapolate(2.0, 3.0, 0.5, p, q, r)
    assert 0 < beta < 1 and M > 0
    if math.isinf(r):
        assert beta == pytest.approx((q - p) / q)


def test_r_dq_matches_gamma():
    d, q = 3, 2.0
    a = d / (2 * q)
    ref = 0.5 * gamma(a - 0.5) * gamma(d / 2 - a) / (gamma((d + 1) / 2 - a) * gamma(a))
    assert cst.r_dq(d, q) == pytest.approx(ref)


def test_sector_tan_domain():
    with pytest.raises(DomainError):
        cst.sector_tan(1.0, 1.5)
    assert cst.sector_tan(1.0, 3.0) > 0


def test_c_r_at_two():
    assert cst.c_r(2.0) == pytest.approx(1.0)
    res = minimize_scalar(cst.c_r, bounds=(1.01, 20), method="bounded")
    assert res.x == pytest.approx(2.0, abs=1e-4)
