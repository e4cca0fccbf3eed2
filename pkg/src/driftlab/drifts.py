"""Model drifts and diffusion matrices sampled on a grid.

Descriptors are small frozen dataclasses; ``sample_drift`` and
``sample_matrix`` turn them into arrays. Singular points are handled by a
nearest-cell cap: inside one grid spacing of the singular set the distance
is replaced by one spacing, so the cap equals the value one cell away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import spectral as sp
from .results import DomainError
from .spectral import Grid, ScalarField, VectorField


# --------------------------------------------------------------------------
# drift descriptors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Hardy:
    """b = sign * c |x|^-2 x. sign=+1 points away from the origin."""

    c: float
    sign: int = 1

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError("Hardy drift needs c > 0")
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")


@dataclass(frozen=True)
class TruncatedHardy:
    """Hardy drift zeroed where |b| > n."""

    c: float
    n: float
    sign: int = 1


@dataclass(frozen=True)
class MollifiedHardy:
    """Heat-mollified Hardy drift e^(eps Delta) b."""

    c: float
    eps: float
    sign: int = 1


@dataclass(frozen=True)
class Slab:
    """b = e 1_{|x_1|<1} |x_1|^(s-1), e = (1, ..., 1)."""

    s: float

    def __post_init__(self):
        if not (0.5 < self.s < 1):
            raise DomainError("slab exponent s must lie in (1/2, 1)")


@dataclass(frozen=True)
class BallSequence:
    """b = e sum_n 8^n 1_{B(z_n, 8^-n)}, z_n = (2^-n, 0, ..., 0)."""

    terms: int = 3

    def __post_init__(self):
        if not (1 <= self.terms <= 6):
            raise DomainError("ball sequence keeps 1..6 terms (resolution limit)")


@dataclass(frozen=True)
class AnnulusLog:
    """Radial drift with b^2 = C 1_{||x|-1|<a} ||x|-1|^-1 (-ln||x|-1|)^-b_exp."""

    b_exp: float = 2.0
    a: float = 0.5
    C: float = 1.0

    def __post_init__(self):
        if self.b_exp <= 1 or not (0 < self.a < 1):
            raise DomainError("annulus drift needs b_exp > 1 and 0 < a < 1")


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class Constant:
    vector: tuple[float, ...]


@dataclass(frozen=True)
class CustomSampled:
    field: VectorField


DriftSpec = Union[Hardy, TruncatedHardy, MollifiedHardy, Slab, BallSequence, AnnulusLog,
                  Zero, Constant, CustomSampled]


# --------------------------------------------------------------------------
# matrix descriptors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class RadialProjection:
    """a = I + c |x|^-2 x (x) x."""

    c: float

    def __post_init__(self):
        if self.c <= -1:
            raise DomainError("radial projection needs c > -1")


@dataclass(frozen=True)
class DiagonalKappa:
    """a = kappa^2 I with kappa = 1 + amplitude * exp(-|x - center|^2 / width^2)."""

    amplitude: float = 0.5
    width: float = 1.0
    center: tuple[float, ...] | None = None

    def kappa(self, grid: Grid) -> np.ndarray:
        cen = self.center or (0.0,) * grid.dim
        r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coords, cen))
        return np.broadcast_to(1.0 + self.amplitude * np.exp(-r2 / self.width ** 2),
                               grid.shape).copy()


@dataclass(frozen=True)
class Regularized:
    """a^n = sigma I + (a - sigma I)(I + a/n)^-1."""

    base: "MatrixSpec"
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("regularization index n must be >= 1")


@dataclass(frozen=True)
class Mollified:
    """Entrywise heat mollification e^(eps Delta) a."""

    base: "MatrixSpec"
    eps: float


MatrixSpec = Union[Identity, RadialProjection, DiagonalKappa, Regularized, Mollified]


def sigma(spec: MatrixSpec) -> float:
    """Lower ellipticity constant."""
    if isinstance(spec, RadialProjection):
        return min(1.0, 1.0 + spec.c)
    if isinstance(spec, DiagonalKappa):
        return min(1.0, (1.0 + min(spec.amplitude, 0.0)) ** 2)
    if isinstance(spec, (Regularized, Mollified)):
        return sigma(spec.base)
    return 1.0


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def _capped_radius(grid: Grid, cap: bool) -> np.ndarray:
    r = grid.radius
    if np.any(r == 0):
        raise DomainError("grid node on the origin; enable the half-cell offset")
    return np.maximum(r, grid.h) if cap else r


def _hardy(grid: Grid, c: float, sign: int, cap: bool) -> np.ndarray:
    r = _capped_radius(grid, cap)
    unit_over_r = 1.0 / (grid.radius * r)
    return np.stack([sign * c * np.broadcast_to(x, grid.shape) * unit_over_r
                     for x in grid.coords])


def sample_drift(spec: DriftSpec, grid: Grid, cap: bool = True) -> VectorField:
    """Evaluate a drift descriptor at the grid nodes."""
    d = grid.dim
    if isinstance(spec, Zero):
        return VectorField(grid, np.zeros((d,) + grid.shape))
    if isinstance(spec, Constant):
        v = np.asarray(spec.vector, dtype=float)
        return VectorField(grid, v.reshape((d,) + (1,) * d) * np.ones((d,) + grid.shape))
    if isinstance(spec, CustomSampled):
        return spec.field
    if isinstance(spec, Hardy):
        return VectorField(grid, _hardy(grid, spec.c, spec.sign, cap))
    if isinstance(spec, TruncatedHardy):
        b = VectorField(grid, _hardy(grid, spec.c, spec.sign, cap))
        return truncate(b, Identity(), spec.n)
    if isinstance(spec, MollifiedHardy):
        b = VectorField(grid, _hardy(grid, spec.c, spec.sign, cap))
        return mollify_drift(b, spec.eps)
    if isinstance(spec, Slab):
        x1 = np.broadcast_to(grid.coords[0], grid.shape)
        a = np.abs(x1)
        if cap:
            a = np.maximum(a, grid.h)
        mag = np.where(np.abs(x1) < 1.0, a ** (spec.s - 1.0), 0.0)
        return VectorField(grid, np.stack([mag] * d))
    if isinstance(spec, BallSequence):
        F = np.zeros(grid.shape)
        for n in range(1, spec.terms + 1):
            z = np.zeros(d)
            z[0] = 2.0 ** (-n)
            r2 = sum((c - zj) ** 2 for c, zj in zip(grid.coords, z))
            F = F + 8.0 ** n * (r2 < 8.0 ** (-2 * n))
        return VectorField(grid, np.stack([F] * d))
    if isinstance(spec, AnnulusLog):
        r = grid.radius
        dist = np.abs(r - 1.0)
        dist_c = np.maximum(dist, grid.h) if cap else dist
        inside = dist < spec.a
        with np.errstate(divide="ignore", invalid="ignore"):
            b2 = np.where(inside, spec.C / (dist_c * (-np.log(dist_c)) ** spec.b_exp), 0.0)
        mag = np.sqrt(b2)
        return VectorField(grid, np.stack([mag * np.broadcast_to(x, grid.shape) / r
                                           for x in grid.coords]))
    raise DomainError(f"unsupported drift descriptor {spec!r}")


def sample_matrix(spec: MatrixSpec, grid: Grid) -> np.ndarray:
    """Per-node symmetric matrices, shape (d, d, *grid.shape)."""
    d = grid.dim
    eye = np.eye(d).reshape((d, d) + (1,) * d)
    if isinstance(spec, Identity):
        return np.broadcast_to(eye, (d, d) + grid.shape).copy()
    if isinstance(spec, RadialProjection):
        r2 = grid.radius ** 2
        out = np.empty((d, d) + grid.shape)
        for i in range(d):
            for k in range(d):
                out[i, k] = (i == k) + spec.c * grid.coords[i] * grid.coords[k] / r2
        return out
    if isinstance(spec, DiagonalKappa):
        return eye * spec.kappa(grid) ** 2
    if isinstance(spec, Regularized):
        a = sample_matrix(spec.base, grid)
        s = sigma(spec.base)
        am = np.moveaxis(a, (0, 1), (-2, -1))
        w, v = np.linalg.eigh(am)
        wn = s + (w - s) / (1.0 + w / spec.n)
        an = np.einsum("...ij,...j,...kj->...ik", v, wn, v)
        return np.moveaxis(an, (-2, -1), (0, 1))
    if isinstance(spec, Mollified):
        a = sample_matrix(spec.base, grid)
        mult = np.exp(-spec.eps * grid.k2)
        out = np.empty_like(a)
        for i in range(d):
            for k in range(d):
                out[i, k] = sp.apply_symbol(grid, a[i, k], mult)
        return out
    raise DomainError(f"unsupported matrix descriptor {spec!r}")


def matrix_eigenvalues(a: np.ndarray) -> np.ndarray:
    """Node-wise eigenvalues, shape (*grid.shape, d)."""
    return np.linalg.eigvalsh(np.moveaxis(a, (0, 1), (-2, -1)))


def nabla_a(spec: MatrixSpec, grid: Grid) -> VectorField:
    """Row divergence (grad a)_i = sum_k d_k a_ik."""
    d = grid.dim
    if isinstance(spec, Identity):
        return VectorField(grid, np.zeros((d,) + grid.shape))
    if isinstance(spec, RadialProjection):
        r2 = grid.radius ** 2
        return VectorField(grid, np.stack([(d - 1) * spec.c * np.broadcast_to(x, grid.shape) / r2
                                           for x in grid.coords]))
    if isinstance(spec, (DiagonalKappa, Regularized, Mollified)):
        if grid.boundary != "periodic":
            raise DomainError("spectral divergence of a matrix needs the periodic box")
        a = sample_matrix(spec, grid)
        out = np.zeros((d,) + grid.shape)
        for i in range(d):
            out[i] = sp.div_apply(grid, a[i])
        return VectorField(grid, out)
    raise DomainError(f"(grad a) unsupported for {spec!r}")


def b_a_field(b: VectorField, a: MatrixSpec | np.ndarray) -> ScalarField:
    """Pointwise sqrt(b . a^-1 . b)."""
    grid = b.grid
    if isinstance(a, Identity):
        return ScalarField(grid, b.magnitude())
    if isinstance(a, RadialProjection):
        r2 = grid.radius ** 2
        bx = sum(bj * x for bj, x in zip(b.components, grid.coords))
        q = np.sum(b.components ** 2, axis=0) - a.c / (a.c + 1.0) * bx ** 2 / r2
        return ScalarField(grid, np.sqrt(np.maximum(q, 0.0)))
    mat = a if isinstance(a, np.ndarray) else sample_matrix(a, grid)
    am = np.moveaxis(mat, (0, 1), (-2, -1))
    bv = np.moveaxis(b.components, 0, -1)[..., None]
    sol = np.linalg.solve(am, bv)[..., 0]
    q = np.sum(np.moveaxis(b.components, 0, -1) * sol, axis=-1)
    return ScalarField(grid, np.sqrt(np.maximum(q, 0.0)))


def truncate(b: VectorField, a: MatrixSpec, n: float) -> VectorField:
    """1_n b: zero where b_a > n."""
    if n <= 0:
        raise DomainError("truncation level must be positive")
    if math.isinf(n):
        return b
    ba = b_a_field(b, a).values
    return VectorField(b.grid, np.where(ba > n, 0.0, b.components))


def mollify_drift(b: VectorField, eps: float) -> VectorField:
    if eps <= 0:
        raise DomainError("eps must be positive")
    mult = np.exp(-eps * b.grid.k2)
    return VectorField(b.grid, np.stack([sp.apply_symbol(b.grid, c, mult)
                                         for c in b.components]))


def scale(b: VectorField, s: float) -> VectorField:
    return VectorField(b.grid, s * b.components)


# --------------------------------------------------------------------------
# text grammar  kind:key=val,key=val
# --------------------------------------------------------------------------

def _kv(text: str) -> tuple[str, dict[str, str]]:
    kind, _, rest = text.strip().partition(":")
    params: dict[str, str] = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            if not eq:
                raise DomainError(f"malformed parameter {item!r} in {text!r}")
            params[k.strip()] = v.strip()
    return kind.strip().lower(), params


def _sign(v: str) -> int:
    if v in ("+", "+1", "1"):
        return 1
    if v in ("-", "-1"):
        return -1
    raise DomainError(f"sign must be + or -, got {v!r}")


_DRIFT_KEYS: dict[str, tuple[Callable, dict[str, Callable]]] = {
    "zero": (lambda **k: Zero(), {}),
    "hardy": (Hardy, {"c": float, "sign": _sign}),
    "trunchardy": (TruncatedHardy, {"c": float, "n": float, "sign": _sign}),
    "mollhardy": (MollifiedHardy, {"c": float, "eps": float, "sign": _sign}),
    "slab": (Slab, {"s": float}),
    "balls": (BallSequence, {"terms": int}),
    "annulus": (AnnulusLog, {"b": float, "a": float, "C": float}),
}


def parse_drift(text: str) -> DriftSpec:
    """Parse e.g. ``hardy:c=0.5,sign=+`` or ``slab:s=0.75``."""
    kind, params = _kv(text)
    if kind not in _DRIFT_KEYS:
        raise DomainError(f"unknown drift kind {kind!r}")
    ctor, conv = _DRIFT_KEYS[kind]
    args = {}
    for k, v in params.items():
        if k not in conv:
            raise DomainError(f"unknown key {k!r} for drift {kind!r}")
        args["b_exp" if (kind == "annulus" and k == "b") else k] = conv[k](v)
    return ctor(**args)


def parse_matrix(text: str) -> MatrixSpec:
    """Parse ``identity``, ``radialproj:c=1``, ``kappa:amp=0.5,width=1``, ``reg:c=1,n=4``."""
    kind, params = _kv(text)
    if kind in ("identity", "id", "i"):
        if params:
            raise DomainError("identity takes no parameters")
        return Identity()
    if kind == "radialproj":
        if set(params) - {"c"}:
            raise DomainError(f"unknown keys {set(params) - {'c'}} for radialproj")
        return RadialProjection(float(params.get("c", "1")))
    if kind == "kappa":
        if set(params) - {"amp", "width"}:
            raise DomainError("kappa accepts amp and width")
        return DiagonalKappa(float(params.get("amp", "0.5")), float(params.get("width", "1")))
    if kind == "reg":
        if set(params) - {"c", "n"}:
            raise DomainError("reg accepts c and n")
        return Regularized(RadialProjection(float(params.get("c", "1"))), int(params.get("n", "1")))
    raise DomainError(f"unknown matrix kind {kind!r}")
