import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab import drifts as dm
from driftlab import operators as op
from driftlab import spectral as sp
from driftlab.results import DomainError
from driftlab.spectral import Grid, VectorField


def test_hardy_magnitude(grid16):
    b = dm.sample_drift(dm.Hardy(0.7, 1), grid16, cap=False)
    assert np.allclose(b.magnitude(), 0.7 / grid16.radius)
    # repulsive: b . x > 0
    bx = sum(bj * x for bj, x in zip(b.components, grid16.coords))
    assert bx.min() > 0


def test_hardy_cap_equals_value_one_cell_away(grid16):
    b = dm.sample_drift(dm.Hardy(1.0, -1), grid16)
    assert b.magnitude().max() <= 1.0 / grid16.h * (1 + 1e-12)


@given(n=st.floats(0.5, 20.0))
def test_truncation_bounds_magnitude(n):
    g = Grid(3, 16, 2.0)
    b = dm.sample_drift(dm.TruncatedHardy(0.5, n, 1), g)
    assert b.magnitude().max() <= n * (1 + 1e-12)


def test_mollified_matches_heat_multiplier(grid16):
    raw = dm.sample_drift(dm.Hardy(0.3, 1), grid16)
    mol = dm.sample_drift(dm.MollifiedHardy(0.3, 0.05, 1), grid16)
    expect = sp.apply_symbol(grid16, raw.components[1], np.exp(-0.05 * grid16.k2))
    assert np.allclose(mol.components[1], expect)


@pytest.mark.parametrize("text,cls", [
    ("hardy:c=0.5,sign=+", dm.Hardy),
    ("trunchardy:c=0.5,n=4,sign=-", dm.TruncatedHardy),
    ("mollhardy:c=0.2,eps=0.05", dm.MollifiedHardy),
    ("slab:s=0.75", dm.Slab),
    ("zero", dm.Zero),
])
def test_parse_drift(text, cls):
    assert isinstance(dm.parse_drift(text), cls)


@pytest.mark.parametrize("text", ["hardy:c=0.5,bad=1", "nope:c=1", "hardy:c", "hardy:c=0.5,sign=2"])
def test_parse_drift_rejects(text):
    with pytest.raises(DomainError):
        dm.parse_drift(text)


@pytest.mark.parametrize("text,cls", [("identity", dm.Identity), ("radialproj:c=1", dm.RadialProjection),
                                      ("kappa:amp=0.5,width=1", dm.DiagonalKappa),
                                      ("reg:c=1,n=4", dm.Regularized)])
def test_parse_matrix(text, cls):
    assert isinstance(dm.parse_matrix(text), cls)


def test_b_a_for_radial_projection(grid16):
    # for radial b, b . a^-1 . b = |b|^2/(1+c)
    b = dm.sample_drift(dm.Hardy(1.0, 1), grid16)
    ba = dm.b_a_field(b, dm.RadialProjection(2.0)).values
    general = dm.b_a_field(b, dm.sample_matrix(dm.RadialProjection(2.0), grid16)).values
    assert np.allclose(ba, b.magnitude() / math.sqrt(3.0))
    assert np.allclose(ba, general)


@given(c=st.floats(-0.5, 5.0), n=st.integers(1, 20))
def test_regularized_matrix_is_bounded_and_elliptic(c, n):
    g = Grid(3, 8, 1.0)
    a = dm.sample_matrix(dm.Regularized(dm.RadialProjection(c), n), g)
    ev = dm.matrix_eigenvalues(a)
    s = dm.sigma(dm.RadialProjection(c))
    assert ev.min() >= s - 1e-12
    assert ev.max() <= s + n + 1e-9


def test_nabla_a_radial_projection_against_spectral():
    g = Grid(3, 32, 4.0)
    spec = dm.Mollified(dm.RadialProjection(1.0), 0.2)
    a = dm.sample_matrix(spec, g)
    num = np.stack([sp.div_apply(g, a[i]) for i in range(3)])
    assert np.allclose(dm.nabla_a(spec, g).components, num)


@pytest.mark.parametrize("spec", [dm.Identity(), dm.RadialProjection(1.0), dm.DiagonalKappa(0.5, 1.0)])
@pytest.mark.parametrize("boundary", ["periodic", "dirichlet"])
def test_A_symmetric_nonnegative(spec, boundary, rng):
    g = Grid(3, 16, 2.0, boundary)
    A = op.assemble_A(spec, g)
    u, v = rng.standard_normal((2,) + g.shape)
    assert A.form(u, v).real == pytest.approx(A.form(v, u).real, rel=1e-9)
    assert A.form(u).real >= 0


def test_fv_identity_close_to_spectral():
    g = Grid(3, 32, 4.0)
    f = np.exp(-g.radius ** 2)
    fv = op.assemble_A(dm.DiagonalKappa(0.0, 1.0), g)(f)
    spec = op.assemble_A(dm.Identity(), g)(f)
    assert np.abs(fv - spec).max() / np.abs(spec).max() < 0.05


def test_generator_adjoint(grid16, rng):
    L = op.make_generator(dm.Identity(), dm.MollifiedHardy(0.3, 0.1, 1), grid16)
    u, v = rng.standard_normal((2,) + grid16.shape)
    assert grid16.inner(L(u), v).real == pytest.approx(grid16.inner(u, L.adjoint(v)).real, rel=1e-9)


def test_accretivity_functional_free_is_dirichlet_form(grid16):
    L = op.make_generator(dm.Identity(), None, grid16)
    u = np.exp(-grid16.radius ** 2)
    val = op.accretivity_functional(L, 2.0, u, grid16)
    grad = sp.grad_apply(grid16, u)
    assert val.real == pytest.approx(np.sum(grad ** 2) * grid16.cell_volume, rel=1e-8)


def test_upwind_generator_markov(grid16):
    L = op.make_generator(dm.Identity(), dm.Hardy(0.5, 1), grid16, scheme="upwind")
    samples = op.smooth_samples(grid16, 4, 7)
    res = op.phillips_stampacchia_check(L, samples, grid16)
    assert res.passed, res.checks


@pytest.mark.parametrize("r", [1.5, 3.0, 6.0])
def test_lr_inequalities_finite_volume(grid16, r):
    # the FV Laplacian is an M-matrix, so the inequalities hold exactly
    A = op.assemble_A(dm.DiagonalKappa(0.5, 1.0), grid16)
    samples = op.smooth_samples(grid16, 3, 11)
    assert op.lr_inequality_check(A, r, samples, slack=1e-9).passed


def test_lr_inequalities_spectral_up_to_gibbs(grid16):
    A = op.assemble_A(dm.Identity(), grid16)
    samples = op.smooth_samples(grid16, 3, 11)
    assert op.lr_inequality_check(A, 6.0, samples, slack=1e-3).passed


def test_smooth_samples_deterministic(grid16):
    a = op.smooth_samples(grid16, 2, 5)
    b = op.smooth_samples(grid16, 2, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert grid16.norm2(a[0]) == pytest.approx(1.0)


def test_vector_field_shape_check(grid16):
    with pytest.raises(DomainError):
        VectorField(grid16, np.zeros((2,) + grid16.shape))
