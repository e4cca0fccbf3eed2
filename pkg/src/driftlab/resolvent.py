"""Resolvent of L = -Delta + b.grad on the periodic box by four routes.

* direct:       restarted GMRES on (zeta + L) u = f, right preconditioned
                by (zeta - Delta)^(-1)
* hille_lions:  J (1 + P)^(-1) J,  J = (zeta - Delta)^(-1/2),  P = J b.grad J
* weak_factor:  J^3 (1 + H*S)^(-1) J with J = (zeta - Delta)^(-1/4),
                H = |b|^(1/2) J,  S = b^(1/2).grad J^3
* theta_r:      R0 - Q (1 + T)^(-1) G with R0 = (zeta - Delta)^(-1),
                G = b^(1/r).grad R0,  Q = R0 |b|^(1/r'),  T = b^(1/r).grad R0 |b|^(1/r')

All multipliers are exact on the grid, so the factorized routes are exact
rearrangements of the discrete operator and must agree with the direct
solve up to solver tolerance. Here b^(s) denotes |b|^(s-1) b.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import constants as cst
from . import operators as op
from . import spectral as sp
from .formbound import estimate_delta_weak, power_iteration
from .results import DomainError, InapplicableError, NumericalError, ScanResult
from .spectral import Grid, VectorField

logger = logging.getLogger(__name__)

Array = np.ndarray
METHODS = ("direct", "hille_lions", "weak_factor", "theta_r")
FLOOR = 1e-30


@dataclass
class ResolventPlan:
    method: str = "direct"
    zeta: complex = 1.0
    r: float = 2.0
    solver_tol: float = 1e-6
    max_iter: int = 2000
    krylov: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if not (0 < self.solver_tol <= 1e-4):
            raise DomainError("solver_tol must lie in (0, 1e-4]")
        if complex(self.zeta).real <= 0:
            raise DomainError("Re zeta must be positive")


@dataclass
class SolveInfo:
    method: str = ""
    iterations: int = 0
    residual: float = 0.0
    ratio: float = float("nan")
    inner: str = ""
    history: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"method": self.method, "iterations": self.iterations, "residual": self.residual,
                "ratio": self.ratio, "inner": self.inner, **self.extra}


def _barr(b: VectorField | Array) -> Array:
    return b.components if isinstance(b, VectorField) else np.asarray(b)


def b_power(b: Array, s: float) -> Array:
    """|b|^(s-1) b with a floor under |b|; the value at zeros of b is 0."""
    mag = np.sqrt(np.sum(b * b, axis=0))
    return b * np.maximum(mag, FLOOR) ** (s - 1.0)


def _dot(b: Array, g: Array) -> Array:
    return np.sum(b * g, axis=0)


def _nrm(v: Array) -> float:
    return float(np.linalg.norm(v.ravel()))


def _gmres(apply: Callable[[Array], Array], rhs: Array, x0: Array | None, tol: float,
           max_iter: int, restart: int = 60) -> tuple[Array, list[float]]:
    shape = rhs.shape
    dtype = complex if np.iscomplexobj(rhs) else float
    n = rhs.size
    A = LinearOperator((n, n), matvec=lambda v: apply(v.reshape(shape)).ravel(), dtype=dtype)
    hist: list[float] = []
    sol, info = gmres(A, rhs.ravel(), x0=None if x0 is None else x0.ravel(), rtol=tol, atol=0.0,
                      restart=restart, maxiter=max(1, max_iter // restart),
                      callback=lambda pr: hist.append(float(pr)), callback_type="pr_norm")
    if info < 0:
        raise NumericalError("GMRES breakdown", history=hist)
    return sol.reshape(shape), hist


def _cplx_if(zeta: complex, f: Array) -> Array:
    if complex(zeta).imag != 0 and not np.iscomplexobj(f):
        return f.astype(complex)
    return f


def solve_operator(apply: Callable[[Array], Array], precond: Callable[[Array], Array], f: Array,
                   tol: float, max_iter: int, info: SolveInfo | None = None) -> Array:
    """Solve apply(u) = f; right preconditioning keeps the true residual in view."""
    w, hist = _gmres(lambda v: apply(precond(v)), f, None, tol * 0.1, max_iter)
    u = precond(w)
    res = _nrm(apply(u) - f) / max(_nrm(f), 1e-300)
    if info is not None:
        info.iterations, info.residual, info.history = len(hist), res, hist
    if not res <= tol:
        raise NumericalError(f"direct solve reached residual {res:.3g} > {tol:.3g}",
                             achieved=res, history=hist)
    return u


def solve_direct(plan: ResolventPlan, L: op.Generator, f: Array,
                 info: SolveInfo | None = None) -> Array:
    """u with ||(zeta + L) u - f|| <= solver_tol ||f||."""
    grid = L.grid
    zeta = complex(plan.zeta)
    f = _cplx_if(zeta, f)
    z = zeta if zeta.imag else zeta.real
    pre = sp.bessel_symbol(grid, z, 1.0)
    if info is not None:
        info.method = "direct"
    return solve_operator(lambda u: z * u + L(u), lambda v: sp.apply_symbol(grid, v, pre),
                          f, plan.solver_tol, plan.max_iter, info)


def solve_adjoint(plan: ResolventPlan, L: op.Generator, f: Array) -> Array:
    """(conj(zeta) + L*)^(-1) f."""
    grid = L.grid
    zeta = complex(plan.zeta).conjugate()
    f = _cplx_if(zeta, f)
    z = zeta if zeta.imag else zeta.real
    pre = sp.bessel_symbol(grid, z, 1.0)
    return solve_operator(lambda u: z * u + L.adjoint(u), lambda v: sp.apply_symbol(grid, v, pre),
                          f, plan.solver_tol, plan.max_iter)


def solve_one_plus(P: Callable[[Array], Array], w: Array, tol: float, max_iter: int,
                   krylov: bool = True, probe: int = 6, info: SolveInfo | None = None) -> Array:
    """(1 + P)^(-1) w by the Neumann fixed point, with a GMRES fallback.

    The geometric ratio is measured from successive increments. A ratio of
    0.9 or more hands over to GMRES when ``krylov`` is set; without Krylov a
    ratio of 1 or more makes the factorization inapplicable.
    """
    nw = max(_nrm(w), 1e-300)
    v = w.copy()
    prev = None
    ratio = float("nan")
    hist: list[float] = []
    for k in range(1, max_iter + 1):
        v_new = w - P(v)
        step = _nrm(v_new - v)
        hist.append(step / nw)
        if prev is not None and prev > 0:
            ratio = step / prev
        v, prev = v_new, step
        if step <= 0.1 * tol * nw:
            break
        if k >= probe and ratio >= 0.9:
            if krylov:
                if info is not None:
                    info.inner = "gmres"
                v, h2 = _gmres(lambda x: x + P(x), w, v, tol * 0.1, max_iter)
                hist.extend(h2)
                break
            if ratio >= 1.0:
                raise InapplicableError(f"fixed-point ratio {ratio:.3f} >= 1")
    else:
        raise NumericalError("fixed point did not converge", achieved=hist[-1], history=hist)
    if info is not None:
        info.inner = info.inner or "fixed_point"
        info.ratio, info.history, info.iterations = ratio, hist, len(hist)
        info.residual = _nrm(v + P(v) - w) / nw
    return v


# --------------------------------------------------------------------------
# factorized routes
# --------------------------------------------------------------------------

def _symbols(grid: Grid, zeta: complex, *betas: float) -> list[Array]:
    z = zeta if complex(zeta).imag else complex(zeta).real
    return [sp.bessel_symbol(grid, z, beta) for beta in betas]


def _need_periodic(grid: Grid):
    if grid.boundary != "periodic":
        raise DomainError("factorized resolvents are implemented on the periodic box")


def hille_lions_resolvent(zeta: complex, b: VectorField | Array, f: Array, grid: Grid,
                          plan: ResolventPlan | None = None,
                          info: SolveInfo | None = None) -> Array:
    """J (1 + P)^(-1) J f with J = (zeta - Delta)^(-1/2), P = J b.grad J."""
    _need_periodic(grid)
    plan = plan or ResolventPlan("hille_lions", zeta)
    barr = _barr(b)
    f = _cplx_if(zeta, f)
    (J,) = _symbols(grid, zeta, 0.5)

    def P(v):
        return sp.apply_symbol(grid, _dot(barr, sp.grad_apply(grid, sp.apply_symbol(grid, v, J))), J)

    v = solve_one_plus(P, sp.apply_symbol(grid, f, J), plan.solver_tol, plan.max_iter,
                       plan.krylov, info=info)
    if info is not None:
        info.method = "hille_lions"
    return sp.apply_symbol(grid, v, J)


def weak_factor_resolvent(zeta: complex, b: VectorField | Array, f: Array, grid: Grid,
                          plan: ResolventPlan | None = None, info: SolveInfo | None = None,
                          check_second_form: bool = True) -> Array:
    """J^3 (1 + H*S)^(-1) J f with quarter-power factors.

    With ``check_second_form`` the value is recomputed as
    J^4 f - J^3 H* (1 + S H*)^(-1) S J f and the two must agree to the
    solver tolerance.
    """
    _need_periodic(grid)
    plan = plan or ResolventPlan("weak_factor", zeta)
    barr = _barr(b)
    f = _cplx_if(zeta, f)
    J1, J3, J4 = _symbols(grid, zeta, 0.25, 0.75, 1.0)
    root = np.sqrt(np.sum(barr * barr, axis=0))
    half = np.sqrt(root)
    bh = b_power(barr, 0.5)

    def S(g):
        return _dot(bh, sp.grad_apply(grid, sp.apply_symbol(grid, g, J3)))

    def Hstar(g):
        return sp.apply_symbol(grid, half * g, J1)

    def HS(v):
        return Hstar(S(v))

    Jf = sp.apply_symbol(grid, f, J1)
    v = solve_one_plus(HS, Jf, plan.solver_tol, plan.max_iter, plan.krylov, info=info)
    u = sp.apply_symbol(grid, v, J3)
    if check_second_form:
        w = solve_one_plus(lambda g: S(Hstar(g)), S(Jf), plan.solver_tol, plan.max_iter,
                           plan.krylov)
        u2 = sp.apply_symbol(grid, f, J4) - sp.apply_symbol(grid, Hstar(w), J3)
        gap = _nrm(u - u2) / max(_nrm(u), 1e-300)
        if info is not None:
            info.extra["second_form_gap"] = gap
        if gap > 10 * plan.solver_tol:
            raise NumericalError(f"the two weak factorizations differ by {gap:.3g}", achieved=gap)
    if info is not None:
        info.method = "weak_factor"
    return u


def theta_r_resolvent(zeta: complex, b: VectorField | Array, r: float, f: Array, grid: Grid,
                      plan: ResolventPlan | None = None, delta_hat: float | None = None,
                      lam_delta: float | None = None, info: SolveInfo | None = None) -> Array:
    """R0 f - Q (1 + T)^(-1) G f.

    The admissible set is r in ]r_-, r_+[ computed from the weak bound
    measured at lam_delta, with Re zeta >= kappa_d lam_delta. By default
    lam_delta = Re zeta / kappa_d, the largest admissible value.
    """
    _need_periodic(grid)
    plan = plan or ResolventPlan("theta_r", zeta, r)
    d = grid.dim
    barr = _barr(b)
    kd = cst.kappa_d(d)
    if lam_delta is None:
        lam_delta = complex(zeta).real / kd
    if complex(zeta).real < kd * lam_delta * (1 - 1e-12):
        raise DomainError("Re zeta below kappa_d lambda")
    if delta_hat is None:
        delta_hat = estimate_delta_weak(VectorField(grid, barr.real), lam_delta).delta_hat
    ends = cst.r_minus_plus(delta_hat, d)
    if ends is None or not (ends[0] < r < ends[1]):
        raise DomainError(f"r={r} outside I_s for delta={delta_hat:.4g}")
    f = _cplx_if(zeta, f)
    (R0,) = _symbols(grid, zeta, 1.0)
    mag = np.sqrt(np.sum(barr * barr, axis=0))
    br = b_power(barr, 1.0 / r)
    tail = mag ** (1.0 - 1.0 / r)

    def G(g):
        return _dot(br, sp.grad_apply(grid, sp.apply_symbol(grid, g, R0)))

    def T(g):
        return G(tail * g)

    v = solve_one_plus(T, G(f), plan.solver_tol, plan.max_iter, plan.krylov, info=info)
    if info is not None:
        info.method = "theta_r"
        info.extra.update(delta_hat=delta_hat, lam_delta=lam_delta, i_s=list(ends))
    return sp.apply_symbol(grid, f, R0) - sp.apply_symbol(grid, tail * v, R0)


def resolve(plan: ResolventPlan, b: VectorField | Array | None, f: Array, grid: Grid,
            info: SolveInfo | None = None, **kw) -> Array:
    """Dispatch on plan.method for L = -Delta + b.grad."""
    if b is None:
        barr = np.zeros((grid.dim,) + grid.shape)
    else:
        barr = _barr(b)
    if plan.method == "direct":
        L = op.make_generator(_identity(), barr, grid)
        return solve_direct(plan, L, f, info)
    if plan.method == "hille_lions":
        return hille_lions_resolvent(plan.zeta, barr, f, grid, plan, info)
    if plan.method == "weak_factor":
        return weak_factor_resolvent(plan.zeta, barr, f, grid, plan, info)
    return theta_r_resolvent(plan.zeta, barr, plan.r, f, grid, plan, info=info, **kw)


def _identity():
    from .drifts import Identity
    return Identity()


# --------------------------------------------------------------------------
# identities and probes
# --------------------------------------------------------------------------

def weak_identity_residual(b: VectorField | Array, f: Array, g: Array, grid: Grid) -> float:
    """Relative gap in <L f, g> = <grad f, grad g> + <b^(1/2).grad f, |b|^(1/2) g>."""
    barr = _barr(b)
    L = op.make_generator(_identity(), barr, grid)
    lhs = grid.inner(L(f), g)
    gf, gg = sp.grad_apply(grid, f), sp.grad_apply(grid, g)
    mag = np.sqrt(np.sum(barr * barr, axis=0))
    rhs = sum(grid.inner(gf[j], gg[j]) for j in range(grid.dim))
    rhs += grid.inner(_dot(b_power(barr, 0.5), gf), np.sqrt(mag) * g)
    return float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))


@dataclass
class NormProbe:
    value: float
    iterations: int
    history: list[float]


def l2_norm_probe(T: Callable[[Array], Array], Tadj: Callable[[Array], Array], x0: Array,
                  tol: float = 1e-8, max_iter: int = 500) -> NormProbe:
    """Lower bound of ||T||_(2 -> 2) from power iteration on T* T.

    Each iterate x certifies ||T|| >= ||T x|| / ||x||; the best is returned.
    """
    best = [0.0]

    def K(x):
        y = T(x)
        best[0] = max(best[0], _nrm(y) / max(_nrm(x), 1e-300))
        return Tadj(y)

    try:
        pr = power_iteration(K, x0, tol=tol, max_iter=max_iter)
        it, hist = pr.iterations, pr.history
    except NumericalError as exc:
        it, hist = max_iter, exc.history
    return NormProbe(best[0], it, [math.sqrt(max(h, 0.0)) for h in hist])


def lr_norm_probe(T: Callable[[Array], Array], Tadj: Callable[[Array], Array], r: float,
                  grid: Grid, x0: Array, iters: int = 60) -> NormProbe:
    """Lower bound of ||T||_(r -> r) by the dual power method for p-norms."""
    if abs(r - 2.0) < 1e-14:
        return l2_norm_probe(T, Tadj, x0)
    rp = cst.conjugate(r)

    def dual(y, p):
        a = np.abs(y)
        return np.sign(y) * a ** (p - 1.0)

    x = x0 / sp.lp_norm(x0, r, grid)
    best, hist = 0.0, []
    for _ in range(iters):
        y = T(x)
        val = sp.lp_norm(y, r, grid) / sp.lp_norm(x, r, grid)
        hist.append(val)
        if val > best * (1 + 1e-10):
            best = val
        elif len(hist) > 5:
            break
        z = Tadj(dual(np.real(y), r))
        x = dual(np.real(z), rp)
        x = x / sp.lp_norm(x, r, grid)
    return NormProbe(max(hist), len(hist), hist)


def _radial_start(grid: Grid, weight: Array) -> Array:
    return np.sqrt(np.abs(weight)) * np.exp(-grid.radius ** 2 / 4.0) + 1e-3


def hs_norm_probe(b: VectorField, lam: float) -> NormProbe:
    """||H* S||_2 = ||(lam - Delta)^(-1/4) b.grad (lam - Delta)^(-3/4)||_2."""
    grid = b.grid
    J1, J3 = _symbols(grid, lam, 0.25, 0.75)
    barr = b.components

    def T(x):
        return sp.apply_symbol(grid, _dot(barr, sp.grad_apply(grid, sp.apply_symbol(grid, x, J3))), J1)

    def Tadj(y):
        return -sp.apply_symbol(grid, sp.div_apply(grid, barr * sp.apply_symbol(grid, y, J1)), J3)

    return l2_norm_probe(T, Tadj, _radial_start(grid, b.magnitude()))


def tr_norm_probe(b: VectorField, lam: float, r: float = 2.0) -> NormProbe:
    """||T_r||_(r -> r) lower bound, T_r = b^(1/r).grad (lam - Delta)^(-1) |b|^(1/r')."""
    grid = b.grid
    (R0,) = _symbols(grid, lam, 1.0)
    barr = b.components
    br = b_power(barr, 1.0 / r)
    tail = b.magnitude() ** (1.0 - 1.0 / r)

    def T(x):
        return _dot(br, sp.grad_apply(grid, sp.apply_symbol(grid, tail * x, R0)))

    def Tadj(y):
        return -tail * sp.apply_symbol(grid, sp.div_apply(grid, br * y), R0)

    return lr_norm_probe(T, Tadj, r, grid, _radial_start(grid, b.magnitude()))


def factor_scaling_probe(b: VectorField, r: float, mu_list: Sequence[float]) -> ScanResult:
    """Decay of || |b|^(1/r) (mu - Delta)^(-1/2) ||_(r -> r) in mu."""
    grid = b.grid
    w = b.magnitude() ** (1.0 / r)
    res = ScanResult("factor_scaling")
    vals = []
    for mu in mu_list:
        (J,) = _symbols(grid, mu, 0.5)
        pr = lr_norm_probe(lambda x: w * sp.apply_symbol(grid, x, J),
                           lambda y: sp.apply_symbol(grid, w * y, J), r, grid,
                           _radial_start(grid, w))
        vals.append(pr.value)
    slope = float(np.polyfit(np.log(mu_list), np.log(vals), 1)[0])
    pred = -1.0 / (2.0 * cst.conjugate(r))
    res.measured["slope"] = slope
    res.predict("slope", pred, "slope -1/(2 r') from the dilation of a degree -1 weight")
    res.check("slope", abs(slope - pred) <= 0.1, slope, pred, "+-0.1", 0.1 - abs(slope - pred))
    res.add_series("factor_norm", mu=list(mu_list), norm=vals)
    res.fit("factor_norm", "factor_norm", "mu", "norm", slope, pred)
    return res.finish()


def resolvent_norm_probe(plan: ResolventPlan, L: op.Generator, iters: int = 30) -> NormProbe:
    """||(zeta + L)^(-1)||_2 lower bound using direct and adjoint solves."""
    grid = L.grid
    x0 = _radial_start(grid, np.ones(grid.shape))
    if complex(plan.zeta).imag:
        x0 = x0.astype(complex)
    return l2_norm_probe(lambda x: solve_direct(plan, L, x), lambda y: solve_adjoint(plan, L, y),
                         x0, tol=1e-6, max_iter=iters)


def pseudo_resolvent_audit(route: Callable[[complex, Array], Array], zeta_list: Sequence[complex],
                           f_samples: Sequence[Array], bound: float,
                           scenario: str = "pseudo_resolvent") -> ScanResult:
    """max ||R_z f - R_w f - (w - z) R_z R_w f|| / ||f|| over pairs and samples.

    Also checks that R_z f vanishes only for f = 0 on the probes.
    """
    res = ScanResult(scenario)
    worst, null_ok = 0.0, True
    for f in f_samples:
        outs = {z: route(z, f) for z in zeta_list}
        for z in zeta_list:
            null_ok &= _nrm(outs[z]) > 0 or _nrm(f) == 0
        for i, z in enumerate(zeta_list):
            for w in zeta_list[i + 1:]:
                lhs = outs[z] - outs[w]
                rhs = (w - z) * route(z, outs[w])
                worst = max(worst, _nrm(lhs - rhs) / _nrm(f))
    res.measured["residual"] = worst
    res.check("pseudo_resolvent", worst <= bound, worst, 0.0, f"<= {bound:g}", bound - worst,
              "R_z - R_w = (w - z) R_z R_w")
    res.check("null_set_trivial", null_ok, float(null_ok), 1.0, "R f = 0 only for f = 0", 0.0,
              "a pseudo-resolvent with trivial null set is a resolvent")
    return res.finish()


def approach_to_identity(route: str, b: VectorField | None, f: Array, mu_list: Sequence[float],
                         grid: Grid, solver_tol: float = 1e-8,
                         scenario: str = "approach_to_identity") -> ScanResult:
    """||mu R_mu f - f|| across mu; for weak_factor also the correction term decay.

    The correction J^4 f - R_mu f (J = (mu - Delta)^(-1/4)) is predicted to
    decay at least like mu^(-3/2).
    """
    res = ScanResult(scenario)
    barr = None if b is None else b.components
    gaps, corr = [], []
    for mu in mu_list:
        plan = ResolventPlan(route if barr is not None else "direct", mu, solver_tol=solver_tol)
        if barr is None:
            u = sp.bessel_apply(grid, f, mu, 1.0)
        else:
            u = resolve(plan, barr, f, grid)
        gaps.append(_nrm(mu * u - f) * grid.cell_volume ** 0.5)
        corr.append(_nrm(sp.bessel_apply(grid, f, mu, 1.0) - u) * grid.cell_volume ** 0.5)
    logmu = np.log(mu_list)
    slope_gap = float(np.polyfit(logmu, np.log(gaps), 1)[0])
    res.measured["slope_gap"] = slope_gap
    res.add_series("approach", mu=list(mu_list), gap=gaps, correction=corr)
    if barr is None:
        lap = grid.norm2(sp.apply_symbol(grid, f, grid.k2))
        bound = [lap / mu for mu in mu_list]
        ok = all(g <= bb * (1 + 1e-10) for g, bb in zip(gaps, bound))
        res.check("multiplier_bound", ok, max(gaps), 0.0, "<= ||Delta f||/mu", 0.0,
                  "||Delta (mu - Delta)^(-1) f|| <= ||Delta f||/mu")
    else:
        if min(corr) <= 0:
            res.notes.append("correction vanished on this sample")
        else:
            slope_c = float(np.polyfit(logmu, np.log(corr), 1)[0])
            res.measured["slope_correction"] = slope_c
            res.predict("slope_correction", -1.5, "correction <= delta/(1-delta) mu^(-3/2) ||grad f||")
            res.check("correction_slope", slope_c <= -1.4, slope_c, -1.5, "<= -1.4", -1.4 - slope_c)
    return res.finish()
