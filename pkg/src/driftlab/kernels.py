"""Bessel kernels, pointwise kernel bounds and gradient-regularity scans.

Kernels are evaluated from the heat-kernel time integral

    (zeta - Delta)^(-beta)(rho) = Gamma(beta)^(-1) int_0^inf e^(-zeta t) t^(beta-1)
                                  (4 pi t)^(-d/2) e^(-rho^2/(4t)) dt

after the substitution t = e^s, on a window around the peak of the modulus.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from . import constants as cst
from . import drifts as dm
from . import operators as op
from . import spectral as sp
from .resolvent import ResolventPlan, solve_direct
from .results import DomainError, NumericalError, ScanResult
from .spectral import Grid, VectorField

logger = logging.getLogger(__name__)

Array = np.ndarray
WINDOW = 60.0  # natural-log decades of the integrand modulus kept


@dataclass
class KernelProfile:
    beta: float
    zeta: complex
    d: int
    rho_samples: Array
    values: Array

    def __post_init__(self):
        if np.any(np.diff(self.rho_samples) <= 0) or np.any(self.rho_samples <= 0):
            raise DomainError("rho samples must be positive and increasing")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("kernel values must be finite")


def _heat_integral(zeta: complex, p: float, rho: float, d: int, rtol: float) -> complex:
    """int_0^inf e^(-zeta t) t^(p-1) (4 pi t)^(-d/2) e^(-rho^2/(4t)) dt."""
    z = complex(zeta)
    a = p - d / 2.0  # exponent of t in ds-measure
    b4 = rho * rho / 4.0
    if z.real < 0 or (z.real == 0 and (a >= 0 or b4 == 0)):
        raise DomainError("time integral diverges for these parameters")

    def logmod(s):
        return -z.real * math.exp(s) + a * s - b4 * math.exp(-s)

    if z.real > 0:
        y = (a + math.sqrt(a * a + 4 * z.real * b4)) / (2 * z.real)
    else:
        y = b4 / (-a)
    s0 = math.log(y) if y > 0 else math.log(max(1.0 / z.real, 1e-300)) - 5
    top = logmod(s0)
    lo, hi, step = s0, s0, 0.5
    while logmod(lo) > top - WINDOW:
        lo -= step
        step *= 1.3
    step = 0.5
    while logmod(hi) > top - WINDOW:
        hi += step
        step *= 1.3

    def re(s):
        t = math.exp(s)
        return math.exp(logmod(s) - top) * math.cos(-z.imag * t)

    def im(s):
        t = math.exp(s)
        return math.exp(logmod(s) - top) * math.sin(-z.imag * t)

    pts = np.linspace(lo, hi, 17)[1:-1]
    out = 0.0 + 0.0j
    err = 0.0
    for part, fn in ((1.0, re), (1j, im)):
        if part == 1j and z.imag == 0:
            continue
        val, e = integrate.quad(fn, lo, hi, points=pts, limit=800, epsabs=0.0,
                                epsrel=min(rtol, 1e-10))
        out += part * val
        err += e
    if err > rtol * max(abs(out), 1e-300) * 10:
        raise NumericalError(f"kernel quadrature error {err:.2e} too large", achieved=err)
    scale = math.exp(top) * (4 * math.pi) ** (-d / 2.0)
    return out * scale


def bessel_kernel(beta: float, zeta: complex, d: int, rho: float, rtol: float = 1e-8) -> complex:
    """(zeta - Delta)^(-beta) kernel at distance rho."""
    if not (0 < beta <= 1) or rho <= 0:
        raise DomainError("need beta in (0, 1] and rho > 0")
    if complex(zeta).real <= 0 and not (zeta == 0 and beta < d / 2):
        raise DomainError("Re zeta must be positive")
    return _heat_integral(zeta, beta, rho, d, rtol) * math.exp(-gammaln(beta))


def bessel_kernel_grad(beta: float, zeta: complex, d: int, rho: float,
                       rtol: float = 1e-8) -> complex:
    """Radial derivative magnitude factor: |grad_x k(x - y)| = |this| for real zeta.

    grad_x k = -(x - y) Gamma(beta)^(-1) int e^(-zeta t) t^(beta-2)/2 (...) dt,
    so the returned value is rho/2 times the time integral with beta - 1.
    """
    if not (0 < beta <= 1) or rho <= 0:
        raise DomainError("need beta in (0, 1] and rho > 0")
    return 0.5 * rho * _heat_integral(zeta, beta - 1.0, rho, d, rtol) * math.exp(-gammaln(beta))


def kernel_profile(beta: float, zeta: complex, d: int, rho: Sequence[float],
                   gradient: bool = False) -> KernelProfile:
    fn = bessel_kernel_grad if gradient else bessel_kernel
    rho = np.asarray(rho, dtype=float)
    vals = np.array([fn(beta, zeta, d, float(x)) for x in rho])
    return KernelProfile(beta, zeta, d, rho, vals)


def bessel_kernel_table(beta: float, lam: float, d: int, rmin: float, rmax: float,
                        points: int = 200) -> Callable[[Array], Array]:
    """Cubic interpolant of log k against log rho for real lam > 0."""
    rr = np.geomspace(rmin, rmax, points)
    lk = np.log([bessel_kernel(beta, lam, d, float(x)).real for x in rr])
    spline = CubicSpline(np.log(rr), lk)

    def table(rho):
        return np.exp(spline(np.log(np.clip(rho, rmin, rmax))))

    return table


def ball_mean(beta: float, lam: float, d: int, R: float) -> float:
    """Mean of the kernel over the ball of radius R centred at the pole."""
    def integrand(s):
        x = math.exp(s)
        return bessel_kernel(beta, lam, d, x).real * x ** d

    val, _ = integrate.quad(integrand, math.log(R) - 40.0, math.log(R), limit=200)
    return d * val / R ** d


# --------------------------------------------------------------------------
# pointwise bound audit
# --------------------------------------------------------------------------

def _a1(d, zeta, rho):
    kd = cst.kappa_d(d)
    lam = complex(zeta).real / kd
    lhs = abs(bessel_kernel_grad(1.0, zeta, d, rho))
    rhs = cst.m_d(d) * bessel_kernel(0.5, lam, d, rho).real
    return lhs, rhs


def _a3(d, zeta, rho):
    kd = cst.kappa_d(d)
    lhs = abs(bessel_kernel_grad(1.0, 2 * kd * zeta, d, rho))
    rhs = 2.0 ** (d / 2.0) * cst.m_d(d) * bessel_kernel(0.5, abs(zeta), d, rho).real
    return lhs, rhs


def _a4(d, zeta, rho):
    lhs = abs(bessel_kernel(0.5, 2 * zeta, d, rho))
    rhs = 2.0 ** ((d + 1) / 4.0) * bessel_kernel(0.5, abs(zeta), d, rho).real
    return lhs, rhs


def _a2(d, zeta, rho, r=2.0):
    # the gradient costs half an order, so the comparison kernel has order beta - 1/2;
    # with equal orders the ratio grows like 1/rho at the pole
    kd = cst.kappa_d(d)
    beta = 1.0 - 1.0 / (2 * r)
    lhs = abs(bessel_kernel_grad(beta, zeta, d, rho))
    rhs = bessel_kernel(beta - 0.5, complex(zeta).real / kd, d, rho).real
    return lhs, rhs


def m_dr(d: int, r: float) -> float:
    """Constant for the order 1 - 1/(2r) gradient bound obtained by the A1 argument.

    m_d Gamma(1/2 - 1/(2r)) / (Gamma(1 - 1/(2r)) Gamma(1/2)).
    """
    if r <= 1:
        raise DomainError("need r > 1")
    beta = 1.0 - 1.0 / (2 * r)
    return cst.m_d(d) * math.exp(gammaln(beta - 0.5) - gammaln(beta) - 0.5 * math.log(math.pi))


def _mstar(d, zeta, rho):
    lhs = abs(bessel_kernel_grad(1.0, 0.0, d, rho))
    rhs = cst.m_d_star(d) * bessel_kernel(0.5, 0.0, d, rho).real
    return lhs, rhs


AUDITS = {"A1": _a1, "A2": _a2, "A3": _a3, "A4": _a4, "mstar": _mstar}
ANCHORS = {
    "A1": "|grad (zeta - Delta)^(-1)| <= m_d (lam - Delta)^(-1/2), Re zeta >= kappa_d lam",
    "A2": "|grad (zeta - Delta)^(-1+1/(2r))| <= m_(d,r) (Re zeta/kappa_d - Delta)^(-1/2+1/(2r))",
    "A3": "|grad (2 kappa_d zeta - Delta)^(-1)| <= 2^(d/2) m_d (|zeta| - Delta)^(-1/2)",
    "A4": "|(2 zeta - Delta)^(-1/2)| <= 2^((d+1)/4) (|zeta| - Delta)^(-1/2)",
    "mstar": "|grad (-Delta)^(-1)| <= m_d* (-Delta)^(-1/2)",
}


def kernel_bound_audit(which: str, d: int, zeta_samples: Sequence[complex],
                       rho_samples: Sequence[float], slack: float = 0.0,
                       d_samples: Sequence[int] | None = None) -> ScanResult:
    """Evaluate both sides of a pointwise bound on a lattice; margin = 1 - max ratio.

    For mstar the lattice is (d, rho) since zeta = 0; both sides share the
    power rho^(1-d) and the constant is exact, so the ratio is 1 up to
    quadrature error and ``slack`` must absorb that error.
    For A2 the best constant on the lattice is reported rather than asserted.
    """
    if which not in AUDITS:
        raise DomainError(f"unknown bound {which!r}")
    fn = AUDITS[which]
    res = ScanResult(f"kernel_audit_{which}")
    rows: list[tuple[float, float, float, float]] = []
    if which == "mstar":
        outer = list(d_samples or [d])
        for dd in outer:
            if dd < 3:
                raise DomainError("mstar needs d >= 3")
            for rho in rho_samples:
                lhs, rhs = fn(dd, 0.0, rho)
                rows.append((dd, rho, lhs, rhs))
    else:
        for zeta in zeta_samples:
            z = complex(zeta)
            if z.real <= 0:
                raise DomainError("zeta outside the half-plane Re zeta > 0")
            for rho in rho_samples:
                lhs, rhs = fn(d, z, rho)
                rows.append((z, rho, lhs, rhs))
    ratios = np.array([lhs / rhs for (_, _, lhs, rhs) in rows])
    worst = float(ratios.max())
    res.measured.update(max_ratio=worst, min_ratio=float(ratios.min()), lattice=len(rows))
    if which == "A2":
        bound = m_dr(d, 2.0)
        res.measured["best_constant"] = worst
        res.predict("m_dr", bound, "m_d Gamma(1/2 - 1/(2r))/(Gamma(1 - 1/(2r)) Gamma(1/2)), r = 2")
        res.check("A2_derived_constant", worst <= bound, worst, bound, "<= derived constant",
                  bound - worst, ANCHORS[which])
        res.notes.append("A2 best constant measured; the derived constant is an upper bound")
    else:
        margin = 1.0 + slack - worst
        res.check(which, margin >= 0, worst, 1.0, f"ratio <= 1 + {slack:g}", margin, ANCHORS[which])
    res.anchors[which] = ANCHORS[which]
    res.add_series("lattice", param_re=[complex(p).real for p, _, _, _ in rows],
                   param_im=[complex(p).imag for p, _, _, _ in rows],
                   rho=[float(r) for _, r, _, _ in rows], ratio=ratios.tolist())
    return res.finish()


def m_d_by_optimization(d: int) -> float:
    """m_d as min over alpha of c(alpha) alpha^((1-d)/2) Gamma(1/2), c(alpha) = sup s e^(-(1-alpha)s^2)."""
    def c_alpha(alpha):
        sol = minimize_scalar(lambda s: -s * math.exp(-(1 - alpha) * s * s),
                              bounds=(0.0, 20.0 / math.sqrt(1 - alpha)), method="bounded",
                              options={"xatol": 1e-12})
        return -sol.fun

    out = minimize_scalar(lambda a: c_alpha(a) * a ** ((1 - d) / 2.0) * math.sqrt(math.pi),
                          bounds=(1e-3, 1 - 1e-6), method="bounded", options={"xatol": 1e-12})
    return float(out.fun)


# --------------------------------------------------------------------------
# gradient regularity
# --------------------------------------------------------------------------

def _grad_norm(grid: Grid, u: Array, q: float) -> float:
    g = sp.grad_apply(grid, u)
    return sp.lp_norm(np.sqrt(np.sum(np.abs(g) ** 2, axis=0)), q, grid)


def _bump(grid: Grid, scale: float) -> Array:
    return np.exp(-(grid.radius / scale) ** 2)


def fit_lambda0(mu: Array, y: Array, lam_max: float) -> tuple[float, float]:
    """lambda_0 in [0, lam_max] minimizing the residual of a straight log-log fit."""
    def resid(l0):
        x = np.log(mu - l0)
        c = np.polyfit(x, np.log(y), 1)
        return float(np.sum((np.polyval(c, x) - np.log(y)) ** 2))

    if lam_max <= 0:
        return 0.0, float(np.polyfit(np.log(mu), np.log(y), 1)[0])
    sol = minimize_scalar(resid, bounds=(0.0, lam_max), method="bounded")
    l0 = float(sol.x) if resid(sol.x) < resid(0.0) else 0.0
    return l0, float(np.polyfit(np.log(mu - l0), np.log(y), 1)[0])


def gradient_bound_scan(b: VectorField | None, q: float, mu_list: Sequence[float], grid: Grid,
                        delta_hat: float = 0.0, scales: Sequence[float] = (0.5, 1.0, 2.0),
                        solver_tol: float = 1e-8, slack: float = 0.1,
                        scenario: str = "gradient_bound_scan") -> ScanResult:
    """Slopes of ||grad u||_q/||f||_q and ||grad u||_(qj)/||f||_q against mu - lambda_0.

    u = (mu + L)^(-1) f with L = -Delta + b.grad. The data family is
    f = phi(sqrt(mu) x / s) for s in ``scales`` and the sup over s is taken,
    so both ratios are evaluated on the scale where the resolvent acts.
    """
    d = grid.dim
    j = cst.sobolev_j(d)
    res = ScanResult(scenario)
    in_range = delta_hat < min(1.0, (2.0 / (d - 2)) ** 2) and 2 <= q < (
        2 / math.sqrt(delta_hat) if delta_hat > 0 else math.inf)
    res.measured["in_range"] = in_range
    barr = None if b is None else b.components
    L = op.make_generator(dm.Identity(), barr, grid)
    r1, r2 = [], []
    for mu in mu_list:
        best1 = best2 = 0.0
        for s in scales:
            f = _bump(grid, s / math.sqrt(mu))
            if barr is None:
                u = sp.bessel_apply(grid, f, mu, 1.0)
            else:
                u = solve_direct(ResolventPlan("direct", mu, solver_tol=solver_tol), L, f)
            nf = sp.lp_norm(f, q, grid)
            best1 = max(best1, _grad_norm(grid, u, q) / nf)
            best2 = max(best2, _grad_norm(grid, u, q * j) / nf)
        r1.append(best1)
        r2.append(best2)
    mu_arr = np.asarray(mu_list, dtype=float)
    l0, s1 = fit_lambda0(mu_arr, np.asarray(r1), 0.5 * mu_arr.min() if barr is not None else 0.0)
    s2 = float(np.polyfit(np.log(mu_arr - l0), np.log(r2), 1)[0])
    p1, p2 = -0.5, 1.0 / q - 0.5
    res.measured.update(lambda0=l0, slope_q=s1, slope_qj=s2)
    res.predict("slope_q", p1, "||grad u||_q <= K1 (mu - lam0)^(-1/2) ||f||_q")
    res.predict("slope_qj", p2, "||grad u||_(qj) <= K2 (mu - lam0)^(1/q - 1/2) ||f||_q")
    res.add_series("gradient", mu=mu_arr.tolist(), ratio_q=r1, ratio_qj=r2)
    res.fit("slope_q", "gradient", "mu", "ratio_q", s1, p1, x_shift=l0)
    res.fit("slope_qj", "gradient", "mu", "ratio_qj", s2, p2, x_shift=l0)
    if in_range:
        res.check("slope_q", abs(s1 - p1) <= slack, s1, p1, f"+-{slack}", slack - abs(s1 - p1))
        res.check("slope_qj", abs(s2 - p2) <= slack, s2, p2, f"+-{slack}", slack - abs(s2 - p2))
    else:
        res.notes.append("parameters outside the admissible range; slopes reported only")
    return res.finish()


def g_condition_check(spec: dm.DriftSpec, grid: Grid, samples: int = 16, seed: int = 0x4B4F4C4D,
                      slack: float = 0.05) -> ScanResult:
    """|<G h, h>| <= delta_1 <|grad |h||^2> with G_ik = d_k b_i on vector samples h."""
    d = grid.dim
    res = ScanResult("g_condition")
    if isinstance(spec, dm.Zero):
        res.measured["max_ratio"] = 0.0
        res.check("zero_drift", True, 0.0, 0.0, "== 0", 0.0)
        return res.finish()
    if isinstance(spec, dm.Hardy):
        c = spec.sign * spec.c
        x = [np.broadcast_to(xi, grid.shape) for xi in grid.coords]
        r2 = np.maximum(grid.radius, grid.h) ** 2
        G = np.empty((d, d) + grid.shape)
        for i in range(d):
            for k in range(d):
                G[i, k] = c * ((i == k) / r2 - 2 * x[i] * x[k] / r2 ** 2)
        delta1 = cst.hardy_g_delta1(spec.c, d)
        delta = cst.hardy_delta(spec.c, d)
    else:
        b = dm.sample_drift(spec, grid).components
        G = np.stack([sp.grad_apply(grid, b[i]) for i in range(d)])
        delta1 = None
        delta = None
    ratios = []
    rng = np.random.default_rng(seed)
    env = np.exp(-grid.radius ** 2)
    for _ in range(samples):
        width = 10 ** rng.uniform(-1.0, 0.0)
        mult = np.exp(-width ** 2 * grid.k2)
        h = np.stack([sp.apply_symbol(grid, rng.standard_normal(grid.shape), mult) * env
                      for _ in range(d)])
        lhs = np.sum(np.einsum("ik...,k...,i...->...", G, h, h)) * grid.cell_volume
        mag = np.sqrt(np.sum(h * h, axis=0))
        den = _grad_norm(grid, mag, 2.0) ** 2
        ratios.append(abs(lhs) / den)
    worst = float(max(ratios))
    res.measured["max_ratio"] = worst
    if delta1 is not None:
        res.predict("delta_1", delta1, "delta_1 = 4 c/(d-2)^2 for the Hardy drift")
        res.check("g_bound", worst <= delta1 + slack, worst, delta1, f"<= delta_1 + {slack}",
                  delta1 + slack - worst)
        qmp = cst.q_minus_plus(delta, delta1)
        res.measured["q_range"] = list(qmp) if qmp else None
        if qmp is None:
            res.notes.append("discriminant negative: the q-range is empty")
    return res.finish()


def moser_supbound_verify(c: float, grid: Grid, pairs: Sequence[tuple[float, float]], r0: float,
                          q: float, mu: float = 1.0, sign: int = 1, f: Array | None = None,
                          solver_tol: float = 1e-9, slack: float = 0.1) -> ScanResult:
    """Power law ||g||_inf <= B ||g||_(r0)^gamma for g = u_n - u_m, truncated Hardy drifts."""
    d = grid.dim
    delta = cst.hardy_delta(c, d)
    sched = cst.moser_schedule(r0, q, d, delta)
    res = ScanResult("moser_supbound")
    if f is None:
        f = np.exp(-grid.radius ** 2 / 0.5 ** 2)
    cache: dict[float, Array] = {}

    def u_of(n):
        if n not in cache:
            b = dm.sample_drift(dm.TruncatedHardy(c, n, sign), grid)
            L = op.make_generator(dm.Identity(), b, grid)
            cache[n] = solve_direct(ResolventPlan("direct", mu, solver_tol=solver_tol), L, f)
        return cache[n]

    sup, lr, used = [], [], []
    for n, m in pairs:
        if n == m:
            res.notes.append(f"pair ({n}, {m}) skipped: g = 0")
            continue
        g = u_of(n) - u_of(m)
        gi = float(np.abs(g).max())
        gr = sp.lp_norm(g, r0, grid)
        if gi < 1e-12 or gr < 1e-12:
            res.notes.append(f"pair ({n}, {m}) skipped: ||g|| below 1e-12")
            continue
        sup.append(gi)
        lr.append(gr)
        used.append([n, m])
    res.predict("gamma", sched.gamma, "gamma = (1 - x'/j)(1 - x'/j + 2x'/r0)^(-1)")
    res.measured["gamma"] = sched.gamma
    res.add_series("envelope", n=[p[0] for p in used], m=[p[1] for p in used], sup=sup, lr=lr)
    if len(sup) >= 2:
        slope = float(np.polyfit(np.log(lr), np.log(sup), 1)[0])
        B = float(max(s / l ** sched.gamma for s, l in zip(sup, lr)))
        res.measured.update(slope=slope, B_hat=B)
        res.fit("envelope", "envelope", "lr", "sup", slope, sched.gamma)
        res.check("envelope_slope", slope >= sched.gamma - slack, slope, sched.gamma,
                  f">= gamma - {slack}", slope - sched.gamma + slack,
                  "||g||_inf <= B ||g||_(r0)^gamma")
    else:
        res.check("usable_pairs", False, float(len(sup)), 2.0, ">= 2", len(sup) - 2.0)
    return res.finish()


def holder_seminorm(u: Array, grid: Grid, gamma_exp: float, sample_pairs: int = 10_000,
                    seed: int = 0x4B4F4C4D) -> float:
    """max |u(x) - u(y)|/|x - y|^gamma over seeded pairs stratified by distance decade."""
    if not (0 < gamma_exp <= 1):
        raise DomainError("gamma_exp must lie in (0, 1]")
    u = np.broadcast_to(u, grid.shape)
    rng = np.random.default_rng(seed)
    n, d, h = grid.n, grid.dim, grid.h
    idx = rng.integers(0, n, size=(sample_pairs, d))
    max_off = n // 2
    octaves = int(math.floor(math.log2(max_off))) + 1
    lengths = 2.0 ** rng.integers(0, octaves, size=sample_pairs) * rng.uniform(1, 2, sample_pairs)
    direc = rng.standard_normal((sample_pairs, d))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    off = np.rint(direc * np.minimum(lengths, max_off)[:, None]).astype(int)
    off[np.all(off == 0, axis=1), 0] = 1
    if grid.boundary == "periodic":
        jdx = (idx + off) % n
    else:
        jdx = np.clip(idx + off, 0, n - 1)
        off = jdx - idx
        keep = np.any(off != 0, axis=1)
        idx, jdx, off = idx[keep], jdx[keep], off[keep]
    dist = np.linalg.norm(off, axis=1) * h
    ux = u[tuple(idx.T)]
    uy = u[tuple(jdx.T)]
    return float(np.max(np.abs(ux - uy) / dist ** gamma_exp))
