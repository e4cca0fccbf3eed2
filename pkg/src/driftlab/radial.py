"""Radial reductions on a log-uniform grid rho = e^s.

For radial u the operators become, in the variable s = ln rho,

    drift   -Delta + c x/|x|^2 . grad :   rho^2 L u = -[u_ss + (d-2-c) u_s]
    matrix  -a . grad^2, a = I + c xx/|x|^2:  rho^2 L u = -[(1+c) u_ss + (d-2-c) u_s]
    matrix, divergence form -div(a grad):     rho^2 L u = -[(1+c)(u_ss + (d-2) u_s)]
    adjoint drift -Delta - div(b .):    rho^2 L* u = -[u_ss + (d-2+c) u_s + c(d-2) u]

and are discretized by second-order central differences in s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, sparse
from scipy.linalg import solveh_banded

from . import constants as cst
from .results import DomainError, NumericalError, ScanResult

Array = np.ndarray
CASES = ("drift", "matrix", "matrix_divergence", "adjoint_drift")


@dataclass(frozen=True)
class RadialGrid:
    rho_min: float = 1e-4
    rho_max: float = 1.0
    points: int = 4096
    log_spacing: bool = True

    def __post_init__(self):
        if not (0 < self.rho_min < self.rho_max):
            raise DomainError("need 0 < rho_min < rho_max")
        if self.points < 64:
            raise DomainError("need at least 64 points")
        if not self.log_spacing:
            raise DomainError("only the log-uniform grid is implemented")

    @property
    def s(self) -> Array:
        return np.linspace(math.log(self.rho_min), math.log(self.rho_max), self.points)

    @property
    def ds(self) -> float:
        return (math.log(self.rho_max) - math.log(self.rho_min)) / (self.points - 1)

    @property
    def rho(self) -> Array:
        return np.exp(self.s)

    def refine(self) -> "RadialGrid":
        return RadialGrid(self.rho_min, self.rho_max, 2 * self.points - 1)


@dataclass
class RadialProfile:
    grid: RadialGrid
    values: Array

    def __post_init__(self):
        if self.values.shape != (self.grid.points,) or not np.all(np.isfinite(self.values)):
            raise DomainError("profile must be finite and match the grid")


def _coefficients(case: str, c: float, d: int) -> tuple[float, float, float]:
    """(A, B, C) with rho^2 L u = -[A u_ss + B u_s + C u]."""
    if d < 3:
        raise DomainError("need d >= 3")
    if case == "drift":
        return 1.0, d - 2.0 - c, 0.0
    if case == "matrix":
        return 1.0 + c, d - 2.0 - c, 0.0
    if case == "matrix_divergence":
        return 1.0 + c, (1.0 + c) * (d - 2.0), 0.0
    if case == "adjoint_drift":
        return 1.0, d - 2.0 + c, c * (d - 2.0)
    raise DomainError(f"unknown case {case!r}")


def radial_generator(c: float, d: int, grid: RadialGrid, case: str = "drift") -> sparse.csr_matrix:
    """Tridiagonal matrix of rho^2 L on the interior nodes, acting on all nodes.

    Shape (points - 2, points): row i gives rho_i^2 (L u)_i from u_(i-1), u_i, u_(i+1).
    """
    A, B, C = _coefficients(case, c, d)
    n, h = grid.points, grid.ds
    lo = -(A / h ** 2 - B / (2 * h))
    mid = 2 * A / h ** 2 - C
    hi = -(A / h ** 2 + B / (2 * h))
    m = n - 2
    rows = np.repeat(np.arange(m), 3)
    cols = (np.arange(m)[:, None] + np.arange(3)[None, :]).ravel()
    vals = np.tile([lo, mid, hi], m)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, n))


def radial_apply(c: float, d: int, grid: RadialGrid, u: Array, case: str = "drift") -> Array:
    """L u at interior nodes (physical scaling, not multiplied by rho^2)."""
    return (radial_generator(c, d, grid, case) @ u) / grid.rho[1:-1] ** 2


def scaled_residual(c: float, d: int, grid: RadialGrid, u: Array, f: Array | None = None,
                    case: str = "drift", shift: float = 0.0) -> float:
    """max |rho^2 ((shift + L) u - f)| / (1 + max |u|) over interior nodes."""
    r = radial_generator(c, d, grid, case) @ u + shift * grid.rho[1:-1] ** 2 * u[1:-1]
    if f is not None:
        r = r - grid.rho[1:-1] ** 2 * f[1:-1]
    return float(np.abs(r).max() / (1.0 + np.abs(u).max()))


def power_alpha(c: float, d: int, case: str = "drift") -> float:
    """Exponent alpha != 0 with L rho^alpha = 0."""
    A, B, _ = _coefficients(case, c, d)
    return -B / A


def shell_exponent(u: Callable[[Array], Array], r: float, d: int, rho: float,
                   octaves: int = 2) -> float:
    """log2 ratio of consecutive dyadic-shell contributions to int |u|^r rho^(d-1) drho.

    Equals d + r alpha for u ~ rho^alpha near 0; negative means divergence.
    """
    def shell(a):
        val, _ = integrate.quad(lambda s: abs(u(np.exp(s))) ** r * math.exp(d * s),
                                math.log(a / 2), math.log(a), epsrel=1e-12, limit=200)
        return val

    vals = [shell(rho / 2 ** k) for k in range(octaves + 1)]
    return float(np.mean([math.log2(vals[k] / vals[k + 1]) for k in range(octaves)]))


def lr_threshold_estimate(u: Callable[[Array], Array], d: int, r_lo: float, r_hi: float,
                          rho: float) -> float:
    """Zero of the shell exponent between r_lo and r_hi by linear interpolation."""
    e_lo, e_hi = shell_exponent(u, r_lo, d, rho), shell_exponent(u, r_hi, d, rho)
    return r_lo + e_lo * (r_hi - r_lo) / (e_lo - e_hi)


def dirichlet_two_solutions(c: float, d: int, case: str = "drift", grid: RadialGrid | None = None,
                            tol: float = 1e-3, threshold_tol: float = 0.05) -> ScanResult:
    """The Dirichlet problem L u = 0 on the unit ball, u = 0 on the sphere.

    u_1 = 0 and u_2 = rho^alpha - 1 both solve it. For alpha < 0 u_2 is
    unbounded and lies in L^r exactly for r < d/(-alpha); for alpha > 0 it is
    bounded and violates the maximum principle.
    """
    grid = grid or RadialGrid()
    alpha = power_alpha(c, d, case)
    if abs(alpha) < 1e-14:
        raise DomainError("alpha = 0: degenerate case delta = 4")
    delta = cst.hardy_delta(c, d) if case == "drift" else cst.matrix_delta_from_c(c, d)
    rho = grid.rho
    u1 = np.zeros_like(rho)
    u2 = rho ** alpha - 1.0
    res = ScanResult(f"dirichlet_{case}")
    res.measured.update(alpha=alpha, delta=delta)
    res.predict("alpha", alpha, "L rho^alpha = 0 for the radial operator")
    r1 = scaled_residual(c, d, grid, u1, case=case)
    r2 = scaled_residual(c, d, grid, u2, case=case)
    res.measured.update(residual_u1=r1, residual_u2=r2)
    res.check("residual_u1", r1 <= tol, r1, 0.0, f"<= {tol:g}", tol - r1)
    res.check("residual_u2", r2 <= tol, r2, 0.0, f"<= {tol:g}", tol - r2,
              "u_2 = |x|^alpha - 1 solves L u = 0, u = 0 on the sphere")
    if alpha < 0:
        unbounded = abs(u2[0]) > abs((grid.rho_min * 2) ** alpha - 1) * 1.01
        res.measured["unbounded"] = bool(unbounded)
        res.check("delta_below_4", delta < 4, delta, 4.0, "< 4", 4.0 - delta)
        res.check("unbounded", unbounded, float(abs(u2[0])), 0.0, "grows as rho_min decreases",
                  0.0)
        pred = -d / alpha
        # membership is decided at the pole; sample far below the grid so the
        # bounded part of u_2 does not bias the shell ratio
        est = lr_threshold_estimate(lambda x: x ** alpha - 1.0, d, pred - 0.5, pred + 0.5,
                                    min(grid.rho_min, 1e-12))
        res.predict("lr_threshold", pred, "u_2 in L^r iff r < d/(-alpha)")
        res.measured["lr_threshold"] = est
        res.check("lr_threshold", abs(est - pred) <= threshold_tol, est, pred,
                  f"+-{threshold_tol}", threshold_tol - abs(est - pred))
    else:
        interior = float(np.abs(u2[1:-1]).max())
        res.measured["max_principle_violation"] = interior
        res.check("delta_above_4", delta > 4, delta, 4.0, "> 4", delta - 4.0)
        res.check("max_principle_flag", interior > 1e-8, interior, 0.0,
                  "interior |u_2| exceeds boundary data 0", interior,
                  "two bounded solutions: the maximum principle fails")
    return res.finish()


def _stiffness(c: float, d: int, grid: RadialGrid) -> tuple[Array, Array]:
    """Banded symmetric form of D^(-1/2) K D^(-1/2) on the interior (Dirichlet both ends).

    K: sum (1+c) w_(i+1/2) (h_(i+1) - h_i)^2 / ds, D: w_i ds, w = rho^(d-2).
    """
    s, h = grid.s, grid.ds
    w = np.exp((d - 2) * s)
    wh = np.exp((d - 2) * 0.5 * (s[1:] + s[:-1]))
    kdiag = (1 + c) * (wh[:-1] + wh[1:]) / h
    koff = -(1 + c) * wh[1:-1] / h
    dm = w[1:-1] * h
    diag = kdiag / dm
    off = koff / np.sqrt(dm[:-1] * dm[1:])
    return diag, off


def hardy_constant_rayleigh(c: float, d: int, grid: RadialGrid | None = None,
                            tol: float = 1e-12, max_iter: int = 5000,
                            history: list | None = None) -> float:
    """min <grad h . a grad h> / || |x|^-1 h ||^2 over radial h, a = I + c xx/|x|^2.

    Inverse power iteration on the generalized problem K v = mu D v; the
    Rayleigh quotients decrease monotonically to the minimum.
    """
    if c <= -1:
        raise DomainError("need c > -1")
    grid = grid or RadialGrid(1e-12, 1e12, 4096)
    diag, off = _stiffness(c, d, grid)
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1] = diag

    def mult(v):
        out = diag * v
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return out

    v = np.ones(diag.size)
    q_old = math.inf
    for _ in range(max_iter):
        v = solveh_banded(ab, v)
        v /= np.linalg.norm(v)
        q = float(v @ mult(v))
        if history is not None:
            history.append(q)
        if abs(q_old - q) <= tol * q:
            return q
        q_old = q
    raise NumericalError("inverse iteration did not converge", achieved=q_old)


def dilation_ratio(f: Callable[[Array], Array], d: int, s_range: tuple[float, float] = (-40, 12),
                   step: float = 1e-3) -> float:
    """||x . grad f||_2 / ||f||_2 for radial f by quadrature in s = ln rho.

    x . grad f = rho f'(rho) = d f(e^s)/ds, taken by a 4th-order difference
    in s, which commutes with dilations.
    """
    def g(s):
        return f(np.exp(s))

    def gs(s):
        return (-g(s + 2 * step) + 8 * g(s + step) - 8 * g(s - step) + g(s - 2 * step)) / (12 * step)

    pts = np.linspace(*s_range, 27)[1:-1]
    num, _ = integrate.quad(lambda s: gs(s) ** 2 * math.exp(d * s), *s_range, points=pts,
                            limit=500, epsrel=1e-13, epsabs=0.0)
    den, _ = integrate.quad(lambda s: g(s) ** 2 * math.exp(d * s), *s_range, points=pts,
                            limit=500, epsrel=1e-13, epsabs=0.0)
    return math.sqrt(num / den)


def dilation_inequality_check(samples: Sequence[Callable[[Array], Array]], d: int,
                              rel_tol: float = 0.02) -> ScanResult:
    """min over samples of ||x . grad f||_2/||f||_2 against the sharp constant d/2."""
    res = ScanResult("dilation_inequality")
    ratios = [dilation_ratio(f, d) for f in samples]
    worst = min(ratios)
    res.predict("sharp_constant", d / 2.0, "||x . grad f||_2 >= (d/2) ||f||_2")
    res.measured["min_ratio"] = worst
    res.check("dilation", worst >= d / 2.0 * (1 - rel_tol), worst, d / 2.0,
              f">= d/2 (1 - {rel_tol})", worst - d / 2.0 * (1 - rel_tol))
    res.add_series("dilation", sample=list(range(len(samples))), ratio=ratios)
    return res.finish()


def im_counterexample(c: float, d: int, lam: float, p_list: Sequence[float],
                      grid: RadialGrid | None = None, tol: float = 1e-3,
                      threshold_tol: float = 0.05) -> ScanResult:
    """u = |x|^-c e^(-|x|^2) solves (lam + L*) u = f for the adjoint of the Hardy drift.

    f = [lam + 2(d - c)] |x|^-c e^(-|x|^2) - 4 |x|^(2-c) e^(-|x|^2), and u lies in
    L^p exactly for p < d/c.
    """
    if not (0 < c < d):
        raise DomainError("need 0 < c < d")
    grid = grid or RadialGrid(1e-4, 6.0, 4096)
    rho = grid.rho
    u = rho ** (-c) * np.exp(-rho ** 2)
    f = (lam + 2 * (d - c)) * u - 4 * rho ** 2 * u
    res = ScanResult("im_counterexample")
    r = scaled_residual(c, d, grid, u, f, case="adjoint_drift", shift=lam)
    r2 = scaled_residual(c, d, grid.refine(), grid.refine().rho ** (-c) * np.exp(-grid.refine().rho ** 2),
                         (lam + 2 * (d - c) - 4 * grid.refine().rho ** 2)
                         * grid.refine().rho ** (-c) * np.exp(-grid.refine().rho ** 2),
                         case="adjoint_drift", shift=lam)
    res.measured.update(residual=r, residual_refined=r2, order=math.log2(r / r2) if r2 > 0 else None)
    res.check("identity_residual", r <= tol, r, 0.0, f"<= {tol:g}", tol - r,
              "(lam + L*) |x|^-c e^(-|x|^2) = f")
    pred = d / c
    res.predict("lp_threshold", pred, "u in L^p iff p < d/c")

    def uf(x):
        return x ** (-c) * np.exp(-x * x)

    exps = {p: shell_exponent(uf, p, d, grid.rho_min) for p in p_list}
    res.add_series("membership", p=list(p_list), shell_exponent=list(exps.values()))
    for p, e in exps.items():
        finite = e > 0
        res.check(f"p={p:g}", finite == (p < pred), e, d - c * p, "sign of d - c p",
                  abs(e), "shell contributions shrink iff u is p-integrable at 0")
    lo = [p for p in p_list if p < pred]
    hi = [p for p in p_list if p > pred]
    if lo and hi:
        est = lr_threshold_estimate(uf, d, max(lo), min(hi), grid.rho_min)
        res.measured["lp_threshold"] = est
        res.check("lp_threshold", abs(est - pred) <= threshold_tol, est, pred,
                  f"+-{threshold_tol}", threshold_tol - abs(est - pred))
    return res.finish()
