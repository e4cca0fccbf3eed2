import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma, kv

from driftlab import constants as cst
from driftlab import drifts as dm
from driftlab import kernels as kn
from driftlab.results import DomainError
from driftlab.spectral import Grid


@given(rho=st.floats(0.05, 8.0), lam=st.floats(0.2, 5.0))
def test_yukawa_closed_form(rho, lam):
    k = kn.bessel_kernel(1.0, lam, 3, rho).real
    assert k == pytest.approx(math.exp(-math.sqrt(lam) * rho) / (4 * math.pi * rho), rel=1e-6)


@pytest.mark.parametrize("d", [3, 4, 5])
@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("rho", [0.1, 1.0, 3.0])
def test_macdonald_form(d, beta, rho):
    lam = 1.7
    nu = beta - d / 2.0
    ref = 2 * (rho / (2 * math.sqrt(lam))) ** nu * kv(nu, rho * math.sqrt(lam))
    ref /= (4 * math.pi) ** (d / 2.0) * gamma(beta)
    assert kn.bessel_kernel(beta, lam, d, rho).real == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("d", [3, 4, 6])
@pytest.mark.parametrize("beta", [0.5, 1.0])
def test_riesz_limit(d, beta):
    rho = 0.7
    ref = gamma(d / 2 - beta) / (4 ** beta * math.pi ** (d / 2) * gamma(beta)) * rho ** (2 * beta - d)
    assert kn.bessel_kernel(beta, 0.0, d, rho).real == pytest.approx(ref, rel=1e-6)


@given(rho=st.floats(0.1, 5.0))
def test_gradient_of_yukawa(rho):
    # d/drho e^(-rho)/(4 pi rho) = -(1 + rho) e^(-rho)/(4 pi rho^2)
    g = kn.bessel_kernel_grad(1.0, 1.0, 3, rho).real
    assert g == pytest.approx((1 + rho) * math.exp(-rho) / (4 * math.pi * rho ** 2), rel=1e-6)


def test_complex_zeta_modulus_below_real_part_kernel():
    rho = 1.3
    assert abs(kn.bessel_kernel(1.0, 2 + 3j, 3, rho)) <= kn.bessel_kernel(1.0, 2.0, 3, rho).real


@pytest.mark.parametrize("d", [3, 4, 5, 8])
def test_m_d_by_optimization(d):
    assert kn.m_d_by_optimization(d) == pytest.approx(cst.m_d(d), rel=1e-9)


@pytest.mark.parametrize("which", ["A1", "A4"])
def test_pointwise_audits_hold(which):
    res = kn.kernel_bound_audit(which, 3, [1.0, 2 + 1j, 0.5 + 3j], np.geomspace(0.05, 5, 6))
    assert res.passed
    assert res.measured["max_ratio"] <= 1.0


def test_mstar_ratio_is_one():
    res = kn.kernel_bound_audit("mstar", 3, [], np.geomspace(0.05, 5, 5), slack=1e-6,
                                d_samples=[3, 5, 9])
    assert res.passed
    assert res.measured["min_ratio"] == pytest.approx(1.0, abs=1e-6)


def test_a2_below_derived_constant():
    res = kn.kernel_bound_audit("A2", 3, [1.0, 3 + 2j], np.geomspace(0.05, 5, 5))
    assert res.passed
    assert res.measured["best_constant"] <= kn.m_dr(3, 2.0)


@pytest.mark.parametrize("which,args", [("A9", (3, [1.0], [1.0])), ("A1", (3, [-1.0], [1.0])),
                                        ("mstar", (2, [], [1.0]))])
def test_audit_validation(which, args):
    with pytest.raises(DomainError):
        kn.kernel_bound_audit(which, *args)


@pytest.mark.parametrize("kw", [(1.5, 1.0, 3, 1.0), (0.5, 1.0, 3, -1.0), (0.5, -1.0, 3, 1.0)])
def test_kernel_domain(kw):
    with pytest.raises(DomainError):
        kn.bessel_kernel(*kw)


def test_profile_requires_increasing_rho():
    with pytest.raises(DomainError):
        kn.kernel_profile(1.0, 1.0, 3, [1.0, 0.5])


def test_table_interpolates():
    tab = kn.bessel_kernel_table(1.0, 1.0, 3, 0.05, 5.0, points=80)
    for rho in (0.13, 0.9, 2.7):
        assert tab(np.array(rho)) == pytest.approx(math.exp(-rho) / (4 * math.pi * rho), rel=1e-5)


def test_gradient_scan_free():
    g = Grid(3, 32, 2.0)
    res = kn.gradient_bound_scan(None, 2.0, [4.0, 16.0, 64.0], g, slack=0.1)
    assert res.passed
    assert "slope_q" in res.fits


def test_g_condition_zero_drift():
    assert kn.g_condition_check(dm.Zero(), Grid(3, 8, 2.0)).passed


@given(a=st.floats(0.1, 3.0))
def test_holder_seminorm_linear(a):
    g = Grid(3, 16, 2.0, "dirichlet")
    u = a * g.coords[0]
    # Lipschitz constant of a linear function on the nonwrapping pairs is a
    assert kn.holder_seminorm(u, g, 1.0, 2000) <= a * (1 + 1e-9)


def test_holder_seminorm_validation():
    g = Grid(3, 8, 2.0)
    with pytest.raises(DomainError):
        kn.holder_seminorm(np.zeros(g.shape), g, 1.5)


def test_m_dr_domain():
    with pytest.raises(DomainError):
        kn.m_dr(3, 1.0)
    assert kn.m_dr(3, 2.0) > cst.m_d(3)
