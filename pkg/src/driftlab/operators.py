"""Discrete diffusion operators, drift terms and accretivity functionals.

Two diffusion discretizations are provided:

* ``spectral``: -Delta as the multiplier |k|^2 (a = I only);
* ``fv``: a symmetric flux form. Diagonal matrices use face fluxes with
  harmonic averaging. Full matrices use D+^T a D+ and D-^T a D- averaged,
  which is symmetric, nonnegative and second order.

The generator L = A + b.grad acts on arrays; the accretivity and Markov
criteria are evaluated with the discrete pairing sum f conj(g) h^d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.optimize import minimize_scalar

from . import constants as cst
from . import drifts as dm
from . import spectral as sp
from .results import DomainError, ScanResult
from .spectral import Grid, ScalarField, VectorField

Array = np.ndarray


@dataclass
class DiscreteOperator:
    grid: Grid
    apply: Callable[[Array], Array]
    symmetric: bool
    label: str
    spectral_lower_bound: float = 0.0
    symbol: Array | None = None  # set for pure multipliers
    diag: Array | None = None  # node-wise diagonal, used by preconditioners

    def __call__(self, u: Array) -> Array:
        return self.apply(u)

    def form(self, u: Array, v: Array | None = None) -> complex:
        """<A u, v> (v defaults to u)."""
        v = u if v is None else v
        return self.grid.inner(self.apply(u), v)


# --------------------------------------------------------------------------
# stencils
# --------------------------------------------------------------------------

def _take(u: Array, axis: int, sl: slice) -> Array:
    idx = [slice(None)] * u.ndim
    idx[axis] = sl
    return u[tuple(idx)]


def faces(u: Array, axis: int, h: float, boundary: str) -> Array:
    """Differences across cell faces along ``axis``.

    Periodic: N faces, face i sits between nodes i-1 and i. Dirichlet: N+1
    faces including the two walls, where the odd ghost -u(edge) is used.
    """
    if boundary == "periodic":
        return (u - np.roll(u, 1, axis=axis)) / h
    first = _take(u, axis, slice(0, 1))
    last = _take(u, axis, slice(-1, None))
    return np.diff(np.concatenate([-first, u, -last], axis=axis), axis=axis) / h


def faces_T(w: Array, axis: int, h: float, boundary: str) -> Array:
    """Exact adjoint of :func:`faces`."""
    if boundary == "periodic":
        return (w - np.roll(w, -1, axis=axis)) / h
    out = -np.diff(w, axis=axis) / h
    idx0 = [slice(None)] * w.ndim
    idx0[axis] = slice(0, 1)
    out[tuple(idx0)] += _take(w, axis, slice(0, 1)) / h
    idx1 = [slice(None)] * w.ndim
    idx1[axis] = slice(-1, None)
    out[tuple(idx1)] -= _take(w, axis, slice(-1, None)) / h
    return out


def d_plus(u: Array, axis: int, h: float, boundary: str) -> Array:
    f = faces(u, axis, h, boundary)
    if boundary == "periodic":
        return np.roll(f, -1, axis=axis)
    return _take(f, axis, slice(1, None))


def d_minus(u: Array, axis: int, h: float, boundary: str) -> Array:
    f = faces(u, axis, h, boundary)
    if boundary == "periodic":
        return f
    return _take(f, axis, slice(0, -1))


def _pad_faces(v: Array, axis: int, front: bool) -> Array:
    z = np.zeros_like(_take(v, axis, slice(0, 1)))
    return np.concatenate([z, v] if front else [v, z], axis=axis)


def _d_plus_T(v: Array, axis: int, h: float, boundary: str) -> Array:
    if boundary == "periodic":
        return faces_T(np.roll(v, 1, axis=axis), axis, h, boundary)
    return faces_T(_pad_faces(v, axis, True), axis, h, boundary)


def _d_minus_T(v: Array, axis: int, h: float, boundary: str) -> Array:
    if boundary == "periodic":
        return faces_T(v, axis, h, boundary)
    return faces_T(_pad_faces(v, axis, False), axis, h, boundary)


def _face_coefficient(aj: Array, axis: int, boundary: str) -> Array:
    """Harmonic mean of a on the faces.

    Wall faces carry the edge value with weight 1/2 (half dual cell), which
    makes D^T W D the conservative flux form with the odd ghost.
    """
    if boundary == "periodic":
        nb = np.roll(aj, 1, axis=axis)
        return 2.0 * aj * nb / (aj + nb)
    first = _take(aj, axis, slice(0, 1))
    last = _take(aj, axis, slice(-1, None))
    ext = np.concatenate([first, aj, last], axis=axis)
    lo = _take(ext, axis, slice(0, -1))
    hi = _take(ext, axis, slice(1, None))
    out = 2.0 * lo * hi / (lo + hi)
    for sl in (slice(0, 1), slice(-1, None)):
        idx = [slice(None)] * out.ndim
        idx[axis] = sl
        out[tuple(idx)] *= 0.5
    return out


def _is_diagonal(a: Array) -> bool:
    d = a.shape[0]
    return all(np.all(a[i, k] == 0) for i in range(d) for k in range(d) if i != k)


def assemble_A(a: dm.MatrixSpec | Array, grid: Grid, scheme: str = "auto") -> DiscreteOperator:
    """Symmetric nonnegative discretization of -div(a grad)."""
    if scheme == "auto":
        scheme = "spectral" if isinstance(a, dm.Identity) else "fv"
    if scheme == "spectral":
        if not isinstance(a, dm.Identity):
            raise DomainError("the spectral scheme is for a = I only")
        k2 = grid.k2
        return DiscreteOperator(grid, lambda u: sp.apply_symbol(grid, u, k2), True,
                                "-Laplace (spectral)", 0.0, symbol=k2)
    mat = a if isinstance(a, np.ndarray) else dm.sample_matrix(a, grid)
    if not isinstance(a, np.ndarray):
        ev = dm.matrix_eigenvalues(mat)
        if ev.min() <= 0:
            raise DomainError("matrix fails node-wise positivity")
    d, h, bc = grid.dim, grid.h, grid.boundary
    if _is_diagonal(mat):
        fc = [_face_coefficient(mat[j, j], j, bc) for j in range(d)]

        def apply(u):
            out = 0.0
            for j in range(d):
                out = out + faces_T(fc[j] * faces(u, j, h, bc), j, h, bc)
            return out

        diag = sum(_take(fc[j], j, slice(0, grid.n)) + (np.roll(fc[j], -1, axis=j) if bc == "periodic"
                   else _take(fc[j], j, slice(1, None))) for j in range(d)) / h ** 2
        return DiscreteOperator(grid, apply, True, "-div(a grad) (fv, harmonic faces)", 0.0,
                                diag=diag)

    def apply_full(u):
        gp = [d_plus(u, j, h, bc) for j in range(d)]
        gm = [d_minus(u, j, h, bc) for j in range(d)]
        out = 0.0
        for i in range(d):
            fp = sum(mat[i, k] * gp[k] for k in range(d))
            fm = sum(mat[i, k] * gm[k] for k in range(d))
            out = out + 0.5 * (_d_plus_T(fp, i, h, bc) + _d_minus_T(fm, i, h, bc))
        return out

    diag = sum(mat[j, j] + 0.5 * (np.roll(mat[j, j], 1, axis=j) + np.roll(mat[j, j], -1, axis=j))
               for j in range(d)) / h ** 2
    return DiscreteOperator(grid, apply_full, True, "-div(a grad) (fv, symmetrized)", 0.0,
                            diag=diag)


# --------------------------------------------------------------------------
# drift and generator
# --------------------------------------------------------------------------

def apply_drift(b: Array, u: Array, grid: Grid, scheme: str = "centered") -> Array:
    """b . grad u. ``centered``: spectral gradient; ``upwind``: first-order one-sided."""
    if scheme == "centered":
        g = sp.grad_apply(grid, u)
        return np.sum(b * g, axis=0)
    if scheme == "upwind":
        h, bc = grid.h, grid.boundary
        out = 0.0
        for j in range(grid.dim):
            bp = np.maximum(b[j], 0.0)
            bm = np.minimum(b[j], 0.0)
            out = out + bp * d_minus(u, j, h, bc) + bm * d_plus(u, j, h, bc)
        return out
    raise DomainError(f"unknown drift scheme {scheme!r}")


@dataclass
class Generator:
    """L = A + b.grad (+ shift) on a grid."""

    A: DiscreteOperator
    b: Array | None = None
    scheme: str = "centered"
    shift: float = 0.0
    label: str = ""

    @property
    def grid(self) -> Grid:
        return self.A.grid

    def __call__(self, u: Array) -> Array:
        grid = self.grid
        if (self.A.symbol is not None and self.b is not None and self.scheme == "centered"
                and grid.boundary == "periodic"):
            # one forward transform feeds both the Laplacian and the gradient
            uh = sfft.fftn(u)
            out = sfft.ifftn(self.A.symbol * uh)
            for j, kj in enumerate(grid.kvec_grad):
                out = out + self.b[j] * sfft.ifftn(1j * kj * uh)
            if not np.iscomplexobj(u):
                out = out.real
        else:
            out = self.A(u)
            if self.b is not None:
                out = out + apply_drift(self.b, u, grid, self.scheme)
        if self.shift:
            out = out + self.shift * u
        return out

    def adjoint(self, u: Array) -> Array:
        """L* u = A u - div(b u) (+ shift); centered periodic scheme only."""
        out = self.A(u)
        if self.b is not None:
            if self.scheme != "centered" or self.grid.boundary != "periodic":
                raise DomainError("adjoint needs the centered periodic drift")
            out = out - sp.div_apply(self.grid, self.b * u)
        if self.shift:
            out = out + self.shift * u
        return out


def make_generator(a: dm.MatrixSpec, b: dm.DriftSpec | VectorField | Array | None,
                   grid: Grid, scheme: str = "centered", shift: float = 0.0,
                   a_scheme: str = "auto") -> Generator:
    """Assemble L = -div(a grad) + b.grad.

    The upwind drift is paired with the finite-volume diffusion so that the
    implicit step matrix is an M-matrix and preserves positivity.
    """
    if scheme == "upwind" and a_scheme == "auto":
        a_scheme = "fv"
    A = assemble_A(a, grid, a_scheme)
    if b is None or isinstance(b, dm.Zero):
        barr = None
    elif isinstance(b, VectorField):
        barr = b.components
    elif isinstance(b, np.ndarray):
        barr = b
    else:
        barr = dm.sample_drift(b, grid).components
    return Generator(A, barr, scheme, shift, label=f"{A.label} + drift[{scheme}]")


# --------------------------------------------------------------------------
# functionals
# --------------------------------------------------------------------------

def _power_weight(u: Array, r: float) -> Array:
    """u |u|^(r-2) with the convention 0 at zeros."""
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(a > 0, u * a ** (r - 2.0), 0.0)
    return w


def accretivity_functional(L: Callable[[Array], Array], r: float, u: Array, grid: Grid) -> complex:
    """<L u, u |u|^(r-2)>."""
    if r <= 1:
        raise DomainError("r must exceed 1")
    if not np.any(u):
        raise DomainError("u must not vanish identically")
    return grid.inner(L(u), _power_weight(u, r))


def trial_profile(grid: Grid, beta: float, scale: float = 1.0) -> Array:
    """u_beta = |x|^-beta exp(-|x|^2) (optionally dilated by ``scale``)."""
    r = grid.radius / scale
    return r ** (-beta) * np.exp(-r * r)


def accretivity_quotient(L, r: float, u: Array, grid: Grid) -> float:
    """Re <L u, u|u|^(r-2)> / ||u||_r^r."""
    return accretivity_functional(L, r, u, grid).real / sp.lp_norm(u, r, grid) ** r


def trial_family_minimum(L, r: float, grid: Grid, beta_max: float | None = None) -> tuple[float, float]:
    """Minimize the accretivity quotient over beta in (0, beta_max) by golden section."""
    if beta_max is None:
        beta_max = (grid.dim - 2) / 2.0
    res = minimize_scalar(lambda b: accretivity_quotient(L, r, trial_profile(grid, b), grid),
                          bounds=(1e-3, beta_max - 1e-3), method="bounded",
                          options={"xatol": 1e-4})
    return float(res.fun), float(res.x)


def smooth_samples(grid: Grid, count: int, seed: int, complex_valued: bool = False,
                   eps: float | None = None, envelope: float | None = None) -> list[Array]:
    """Seeded smooth random fields: mollified white noise under a Gaussian envelope."""
    rng = np.random.default_rng(seed)
    eps = (2 * grid.h) ** 2 if eps is None else eps
    env = np.exp(-(grid.radius / (envelope or grid.half_width / 2.5)) ** 2)
    mult = np.exp(-eps * grid.k2)
    out = []
    for _ in range(count):
        w = rng.standard_normal(grid.shape)
        if complex_valued:
            w = w + 1j * rng.standard_normal(grid.shape)
        f = sp.apply_symbol(grid, w, mult) * env
        out.append(f / grid.norm2(f))
    return out


def phillips_stampacchia_check(L, samples: Sequence[Array], grid: Grid,
                               scenario: str = "markov_criteria", slack: float = 1e-10) -> ScanResult:
    """Min over samples of [L f, f+] and Re[L f, f - f_and] (f_and = (|f| ^ 1) sgn f)."""
    res = ScanResult(scenario)
    ph, st = [], []
    for f in samples:
        f = np.real(f)
        Lf = np.real(L(f))
        scale = abs(grid.inner(Lf, f)) + 1e-300
        ph.append(grid.inner(Lf, np.maximum(f, 0.0)).real / scale)
        # scale f so that |f| exceeds 1 on part of the support
        fs = f / (0.5 * np.abs(f).max())
        Lfs = np.real(L(fs))
        f_and = np.minimum(np.abs(fs), 1.0) * np.sign(fs)
        st.append(grid.inner(Lfs, fs - f_and).real / (abs(grid.inner(Lfs, fs)) + 1e-300))
    res.measured["phillips_min"] = float(min(ph))
    res.measured["stampacchia_min"] = float(min(st))
    res.check("phillips", min(ph) >= -slack, min(ph), 0.0, f">= -{slack:g}", min(ph) + slack,
              "positivity criterion [L f, f+] >= 0")
    res.check("stampacchia", min(st) >= -slack, min(st), 0.0, f">= -{slack:g}", min(st) + slack,
              "L-infinity contraction criterion Re[L f, f - f_and] >= 0")
    return res.finish()


def lr_inequality_check(A: DiscreteOperator, r: float, samples: Sequence[Array],
                        scenario: str = "lr_inequalities", slack: float = 1e-9) -> ScanResult:
    """Check (4/rr')Q <= Re <A f, |f|^(r-1) sgn f> <= varkappa(r) Q and the Im/Re bound.

    Here Q = ||A^(1/2) f_(r)||^2 = <A f_(r), f_(r)>, f_(r) = f |f|^(r/2 - 1).
    """
    grid = A.grid
    lower, upper = cst.lower_lr_factor(r), cst.varkappa(r)
    imre = cst.im_re_ratio(r)
    res = ScanResult(scenario)
    lo_m, up_m, im_m = [], [], []
    for f in samples:
        fr = _power_weight(f, r / 2.0 + 1.0)  # f |f|^(r/2-1)
        Q = A.form(fr).real
        val = grid.inner(A(f), _power_weight(f, r))
        lo_m.append((val.real - lower * Q) / Q)
        up_m.append((upper * Q - val.real) / Q)
        im_m.append((imre * val.real - abs(val.imag)) / max(val.real, 1e-300))
    res.measured.update(lower_margin=min(lo_m), upper_margin=min(up_m), imre_margin=min(im_m),
                        lower_factor=lower, varkappa=upper, imre_bound=imre)
    res.check("lower", min(lo_m) >= -slack, min(lo_m), 0.0, f">= -{slack:g}", min(lo_m))
    res.check("upper", min(up_m) >= -slack, min(up_m), 0.0, f">= -{slack:g}", min(up_m))
    res.check("im_re", min(im_m) >= -slack, min(im_m), 0.0, f">= -{slack:g}", min(im_m))
    return res.finish()


def sector_bound_check(L: Generator, r: float, delta_hat: float, lam: float,
                       samples: Sequence[Array], scenario: str = "sector_bound",
                       slack: float = 0.0) -> ScanResult:
    """Max over samples of |Im <L u, u|u|^(r-2)>| / Re <(z + L) u, u|u|^(r-2)>, z = 2 lam sqrt(delta)."""
    rd = cst.r_delta(delta_hat)
    if not r > rd:
        raise DomainError(f"r={r} is not in the open contraction interval (r_delta={rd})")
    bound = cst.sector_tan(delta_hat, r)
    z = 2.0 * lam * math.sqrt(delta_hat)
    grid = L.grid
    ratios = []
    for u in samples:
        val = accretivity_functional(L, r, u, grid)
        base = z * sp.lp_norm(u, r, grid) ** r
        ratios.append(abs(val.imag) / (val.real + base))
    res = ScanResult(scenario)
    res.measured["max_ratio"] = float(max(ratios))
    res.predict("tan_theta_bound", bound, "sector bound K (2 - r' sqrt(delta))^-1")
    res.check("sector", max(ratios) <= bound * (1 + slack), max(ratios), bound,
              f"<= bound*(1+{slack:g})", bound - max(ratios))
    return res.finish()
