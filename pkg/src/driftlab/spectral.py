"""Fourier-multiplier calculus on a box.

Two discrete realizations share one interface:

* ``periodic``: the box [-L, L)^d with periodic wrap, transforms by FFT;
* ``dirichlet``: zero boundary values, transforms by the type-II sine
  transform. Sine modes sin(k_m (x + L)) with k_m = pi m / (2L) are exact
  eigenfunctions of the Laplacian at the half-offset nodes.

Nodes sit at x_j = -L + (j + 1/2) h so no node hits the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

from .results import DomainError, NumericalError

Symbol = Callable[[Sequence[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [-L, L)^d."""

    dim: int
    n: int
    half_width: float = 8.0
    boundary: str = "periodic"
    offset: bool = True

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise DomainError("points_per_axis must be a power of two >= 8")
        if self.dim < 1:
            raise DomainError("dim must be >= 1")
        if self.half_width <= 0:
            raise DomainError("box half width must be positive")
        if self.boundary not in ("periodic", "dirichlet"):
            raise DomainError(f"unknown boundary {self.boundary!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        shift = 0.5 if self.offset else 0.0
        return -self.half_width + (np.arange(self.n) + shift) * self.h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays (sparse meshgrid)."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def radius(self) -> np.ndarray:
        r2 = sum(c * c for c in self.coords)
        return np.sqrt(np.broadcast_to(r2, self.shape))

    @cached_property
    def freqs(self) -> np.ndarray:
        """One-dimensional wavenumbers of the realization."""
        if self.boundary == "periodic":
            return 2.0 * np.pi * sfft.fftfreq(self.n, self.h)
        return np.pi * np.arange(1, self.n + 1) / (2.0 * self.half_width)

    @cached_property
    def kvec(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.freqs] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(sum(k * k for k in self.kvec), self.shape).copy()

    @cached_property
    def kvec_grad(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers with the unpaired Nyquist mode removed (periodic only).

        Zeroing it keeps the discrete gradient exactly skew-adjoint and real.
        """
        k = self.freqs.copy()
        if self.boundary == "periodic":
            k[self.n // 2] = 0.0
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij", sparse=True))

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Discrete L^2 pairing <f, g> = sum f conj(g) h^d."""
        return complex(np.vdot(g, f)) * self.cell_volume

    def norm2(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.vdot(f, f).real * self.cell_volume))

    def tag(self) -> str:
        return f"{self.boundary}:{self.n}^{self.dim}:L={self.half_width:g}"

    def with_n(self, n: int) -> "Grid":
        return Grid(self.dim, n, self.half_width, self.boundary, self.offset)


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise DomainError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field has non-finite entries")


@dataclass
class VectorField:
    grid: Grid
    components: np.ndarray  # shape (dim, *grid.shape)

    def __post_init__(self):
        self.components = np.asarray(self.components)
        if self.components.shape != (self.grid.dim,) + self.grid.shape:
            raise DomainError("vector field must have dim components on the grid")

    def component(self, j: int) -> ScalarField:
        return ScalarField(self.grid, self.components[j])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.components) ** 2, axis=0))


@dataclass(frozen=True)
class MultiplierOp:
    """Fourier multiplier given by ``symbol(kvec, k2)``."""

    symbol: Symbol
    label: str

    def __post_init__(self):
        if not self.label:
            raise DomainError("multiplier label must be nonempty")

    def __call__(self, f: ScalarField) -> ScalarField:
        sym = np.asarray(self.symbol(f.grid.kvec, f.grid.k2))
        if not np.all(np.isfinite(sym)):
            raise DomainError(f"symbol {self.label} is not finite on the grid")
        return ScalarField(f.grid, apply_symbol(f.grid, f.values, sym))


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------

def forward(grid: Grid, f: np.ndarray) -> np.ndarray:
    if grid.boundary == "periodic":
        return sfft.fftn(f)
    if np.iscomplexobj(f):
        return (sfft.dstn(f.real, type=2, norm="ortho")
                + 1j * sfft.dstn(f.imag, type=2, norm="ortho"))
    return sfft.dstn(f, type=2, norm="ortho")


def inverse(grid: Grid, fh: np.ndarray) -> np.ndarray:
    if grid.boundary == "periodic":
        return sfft.ifftn(fh)
    if np.iscomplexobj(fh):
        return (sfft.idstn(fh.real, type=2, norm="ortho")
                + 1j * sfft.idstn(fh.imag, type=2, norm="ortho"))
    return sfft.idstn(fh, type=2, norm="ortho")


def _real_out(f: np.ndarray, sym) -> bool:
    return not np.iscomplexobj(f) and not np.iscomplexobj(sym)


def apply_symbol(grid: Grid, f: np.ndarray, sym) -> np.ndarray:
    """Multiply the transform of ``f`` by ``sym`` and transform back.

    Real input with a real, even symbol stays real.
    """
    out = inverse(grid, forward(grid, f) * sym)
    if _real_out(f, sym) and np.iscomplexobj(out):
        out = out.real
    return out


def bessel_symbol(grid: Grid, zeta: complex, beta: float) -> np.ndarray:
    z = complex(zeta)
    if z.real <= 0:
        if z == 0 and grid.boundary == "dirichlet":
            pass  # no zero mode in the sine basis
        else:
            raise DomainError("Re zeta must be positive (zeta = 0 only without a zero mode)")
    base = z + grid.k2
    if z.imag == 0:
        return (base.real) ** (-beta)
    return base ** (-beta)


def bessel_apply(grid: Grid, f: np.ndarray, zeta: complex, beta: float) -> np.ndarray:
    return apply_symbol(grid, f, bessel_symbol(grid, zeta, beta))


def grad_apply(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Spectral gradient; returns an array of shape (dim, *shape)."""
    fh = forward(grid, f)
    out = np.empty((grid.dim,) + grid.shape, dtype=complex if np.iscomplexobj(f) else float)
    if grid.boundary == "periodic":
        for j, kj in enumerate(grid.kvec_grad):
            g = sfft.ifftn(1j * kj * fh)
            out[j] = g if np.iscomplexobj(f) else g.real
        return out
    # sine series -> cosine series along axis j; the top mode vanishes at the nodes
    for j, kj in enumerate(grid.kvec):
        ch = np.moveaxis(kj * fh, j, 0)
        shifted = np.zeros_like(ch)
        shifted[1:] = ch[:-1]
        shifted = np.moveaxis(shifted, 0, j)
        out[j] = _idct_mixed(shifted, j, grid.dim)
    return out


def _idct_mixed(coef: np.ndarray, axis: int, dim: int) -> np.ndarray:
    def one(c):
        y = sfft.idct(c, type=2, norm="ortho", axis=axis)
        others = [a for a in range(dim) if a != axis]
        if others:
            y = sfft.idstn(y, type=2, norm="ortho", axes=others)
        return y

    if np.iscomplexobj(coef):
        return one(coef.real) + 1j * one(coef.imag)
    return one(coef)


def div_apply(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Spectral divergence, the negative adjoint of :func:`grad_apply` (periodic)."""
    if grid.boundary != "periodic":
        raise DomainError("spectral divergence is implemented on the periodic box only")
    acc = 0
    for j, kj in enumerate(grid.kvec_grad):
        acc = acc + 1j * kj * sfft.fftn(v[j])
    out = sfft.ifftn(acc)
    return out if np.iscomplexobj(v) else out.real


# --------------------------------------------------------------------------
# field-level operations
# --------------------------------------------------------------------------

def bessel_potential(f: ScalarField, zeta: complex, beta: float) -> ScalarField:
    """(zeta - Delta)^(-beta) f via the multiplier (zeta + |k|^2)^(-beta)."""
    if not (0 < beta <= 2):
        raise DomainError("beta must lie in (0, 2]")
    return ScalarField(f.grid, bessel_apply(f.grid, f.values, zeta, beta))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, grad_apply(f.grid, f.values))


def heat_mollify(f: ScalarField, eps: float) -> ScalarField:
    """e^(eps Delta) f."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    return ScalarField(f.grid, apply_symbol(f.grid, f.values, np.exp(-eps * f.grid.k2)))


def lp_norm(f: ScalarField | np.ndarray, p: float, grid: Grid | None = None) -> float:
    """Discrete L^p norm with cell-volume weight; p = inf gives max |f|."""
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f)
        if grid is None:
            raise DomainError("grid required for raw arrays")
    if p < 1:
        raise DomainError("p must be >= 1")
    a = np.abs(vals)
    if math.isinf(p):
        return float(a.max())
    m = a.max()
    if m == 0:
        return 0.0
    s = np.sum((a / m) ** p) * grid.cell_volume
    return float(m * s ** (1.0 / p))


def plancherel_sum(f: ScalarField) -> float:
    """Weighted sum of |f^|^2 equal to ||f||_2^2."""
    g = f.grid
    fh = forward(g, f.values)
    if g.boundary == "periodic":
        return float(np.sum(np.abs(fh) ** 2) / f.values.size * g.cell_volume)
    return float(np.sum(np.abs(fh) ** 2) * g.cell_volume)


def plane_wave(grid: Grid, m: Sequence[int]) -> ScalarField:
    """Exact eigenfunction with integer mode ``m`` of the realization."""
    if grid.boundary == "periodic":
        phase = sum(np.pi * mj / grid.half_width * c for mj, c in zip(m, grid.coords))
        return ScalarField(grid, np.broadcast_to(np.exp(1j * phase), grid.shape).copy())
    vals = 1.0
    for mj, c in zip(m, grid.coords):
        vals = vals * np.sin(np.pi * mj * (c + grid.half_width) / (2 * grid.half_width))
    return ScalarField(grid, np.broadcast_to(vals, grid.shape).copy())


def plane_wave_k2(grid: Grid, m: Sequence[int]) -> float:
    if grid.boundary == "periodic":
        return float(sum((np.pi * mj / grid.half_width) ** 2 for mj in m))
    return float(sum((np.pi * mj / (2 * grid.half_width)) ** 2 for mj in m))


def fractional_power_by_quadrature(apply_resolvent: Callable[[float, np.ndarray], np.ndarray],
                                   beta: float, f, grid: Grid | None = None,
                                   spectrum: tuple[float, float] = (1e-3, 1e4),
                                   rtol: float = 1e-9, max_nodes: int = 4000):
    """Gamma^(-beta) f from resolvents of a nonnegative operator Gamma.

    Uses Gamma^(-beta) = sin(pi beta)/pi / (1-beta) * int_0^inf mu^(1-beta)
    (mu + Gamma)^(-2) dmu with mu = e^s and the trapezoid rule, which is
    spectrally accurate for this analytic integrand. The s-range starts from
    ``spectrum`` (rough bounds of the spectrum of Gamma) and is widened until
    the analytic tail bounds fall below ``rtol`` of the running sum; the step
    is halved until two successive sums agree to ``rtol``.
    """
    if not (0 < beta < 1):
        raise DomainError("beta must lie in (0, 1)")
    is_field = isinstance(f, ScalarField)
    vals = f.values if is_field else np.asarray(f)
    g = f.grid if is_field else grid

    def integrand(s):
        mu = math.exp(s)
        w = apply_resolvent(mu, apply_resolvent(mu, vals))
        return mu ** (2.0 - beta) * w

    def nrm(v):
        return float(np.sqrt(np.vdot(v, v).real))

    lo0, hi0 = spectrum
    s_lo = math.log(lo0) - 30.0 / (2.0 - beta)
    s_hi = math.log(hi0) + 30.0 / beta
    step = 0.5
    cache: dict[float, np.ndarray] = {}

    def node(s):
        key = round(s, 12)
        if key not in cache:
            cache[key] = integrand(s)
        return cache[key]

    def trap(a, b, hstep):
        m = int(math.ceil((b - a) / hstep))
        ss = a + hstep * np.arange(m + 1)
        acc = sum(node(s) for s in ss)
        return acc * hstep, node(ss[0]), node(ss[-1])

    prev = None
    for _ in range(12):
        total, left, right = trap(s_lo, s_hi, step)
        tn = nrm(total)
        tail = nrm(left) / (2.0 - beta) + nrm(right) / beta
        if tn > 0 and tail > rtol * tn:
            s_lo -= 10.0
            s_hi += 10.0 / beta
            prev = None
            continue
        if prev is not None and nrm(total - prev) <= rtol * max(tn, 1e-300):
            out = math.sin(math.pi * beta) / math.pi / (1.0 - beta) * total
            return ScalarField(g, out) if is_field else out
        prev = total
        step /= 2.0
        if len(cache) > max_nodes:
            break
    achieved = nrm(total - prev) / max(tn, 1e-300) if prev is not None else float("nan")
    raise NumericalError("fractional power quadrature did not converge", achieved=achieved)
