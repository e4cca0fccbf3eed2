import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab import spectral as sp
from driftlab.results import DomainError
from driftlab.spectral import Grid, ScalarField

boundaries = ["periodic", "dirichlet"]
modes = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))


@pytest.mark.parametrize("boundary", boundaries)
@given(m=modes, beta=st.floats(0.1, 2.0), zeta=st.floats(0.1, 10.0))
def test_bessel_potential_on_eigenfunction(boundary, m, beta, zeta):
    g = Grid(3, 16, 2.0, boundary)
    w = sp.plane_wave(g, m)
    out = sp.bessel_potential(w, zeta, beta)
    expect = (zeta + sp.plane_wave_k2(g, m)) ** -beta * w.values
    assert np.allclose(out.values, expect, atol=1e-12)


@pytest.mark.parametrize("boundary", boundaries)
def test_bessel_semigroup_in_beta(boundary, rng):
    g = Grid(3, 16, 3.0, boundary)
    f = rng.standard_normal(g.shape)
    a = sp.bessel_apply(g, sp.bessel_apply(g, f, 1.5, 0.25), 1.5, 0.75)
    b = sp.bessel_apply(g, f, 1.5, 1.0)
    assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("boundary", boundaries)
def test_plancherel(boundary, rng):
    g = Grid(3, 16, 3.0, boundary)
    f = ScalarField(g, rng.standard_normal(g.shape))
    assert sp.plancherel_sum(f) == pytest.approx(g.norm2(f.values) ** 2, rel=1e-12)


def test_grad_div_adjoint(grid16, rng):
    f = rng.standard_normal(grid16.shape)
    v = rng.standard_normal((3,) + grid16.shape)
    lhs = np.sum(sp.grad_apply(grid16, f) * v)
    rhs = -np.sum(f * sp.div_apply(grid16, v))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_div_grad_is_laplacian_off_nyquist(grid16):
    w = sp.plane_wave(grid16, (1, 2, 3))
    lap = sp.div_apply(grid16, sp.grad_apply(grid16, w.values))
    assert np.allclose(lap, -sp.plane_wave_k2(grid16, (1, 2, 3)) * w.values, atol=1e-10)


def test_dirichlet_gradient_of_sine():
    g = Grid(3, 16, 2.0, "dirichlet")
    w = sp.plane_wave(g, (2, 1, 1)).values
    k = math.pi * 2 / (2 * g.half_width)
    x, y, z = g.coords
    L = g.half_width
    expect = (k * np.cos(k * (x + L)) * np.sin(math.pi * (y + L) / (2 * L))
              * np.sin(math.pi * (z + L) / (2 * L)))
    assert np.allclose(sp.grad_apply(g, w)[0], expect, atol=1e-10)


@given(p=st.floats(1.0, 12.0), s=st.floats(0.5, 2.0))
def test_lp_norm_homogeneous(p, s):
    g = Grid(3, 8, 2.0)
    f = np.exp(-g.radius ** 2)
    assert sp.lp_norm(s * f, p, g) == pytest.approx(s * sp.lp_norm(f, p, g), rel=1e-12)


def test_lp_norm_inf_and_p2(grid16, rng):
    f = rng.standard_normal(grid16.shape)
    assert sp.lp_norm(f, math.inf, grid16) == pytest.approx(np.abs(f).max())
    assert sp.lp_norm(f, 2.0, grid16) == pytest.approx(grid16.norm2(f), rel=1e-12)


def test_heat_mollify_positive_and_mass(grid16):
    f = ScalarField(grid16, np.exp(-grid16.radius ** 2))
    m = sp.heat_mollify(f, 0.1)
    assert m.values.min() > -1e-12
    assert m.values.sum() == pytest.approx(f.values.sum(), rel=1e-12)


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_fractional_power_quadrature_matches_multiplier(beta, rng):
    g = Grid(3, 8, 2.0)
    f = rng.standard_normal(g.shape)
    lam = 0.7
    gam = lam + g.k2

    def res(mu, v):
        return sp.apply_symbol(g, v, 1.0 / (mu + gam))

    out = sp.fractional_power_by_quadrature(res, beta, f, g, spectrum=(lam, gam.max()))
    assert np.allclose(out, sp.apply_symbol(g, f, gam ** -beta), rtol=1e-7, atol=1e-9)


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid(3, 12)
    with pytest.raises(DomainError):
        Grid(3, 16, -1.0)
    with pytest.raises(DomainError):
        Grid(3, 16, 1.0, "neumann")


def test_offset_avoids_origin():
    assert Grid(3, 16, 1.0).radius.min() > 0


def test_bessel_symbol_rejects_left_half_plane(grid16):
    with pytest.raises(DomainError):
        sp.bessel_symbol(grid16, -1.0, 0.5)
    with pytest.raises(DomainError):
        sp.bessel_symbol(grid16, 0.0, 0.5)
    assert np.isfinite(sp.bessel_symbol(Grid(3, 16, 1.0, "dirichlet"), 0.0, 0.5)).all()
