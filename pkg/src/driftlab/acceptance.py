"""The acceptance battery: fourteen quantitative checks composed from module runs.

Each criterion is a function ``(tol, seed) -> ScanResult``. Named tolerances
live in :data:`TOLERANCES` and may be overridden key by key.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from . import constants as cst
from . import drifts as dm
from . import formbound as fb
from . import kernels as kn
from . import operators as op
from . import radial as rd
from . import resolvent as rv
from . import semigroup as sg
from .results import DomainError, ScanResult
from .spectral import Grid

logger = logging.getLogger(__name__)

Tol = Mapping[str, float]

TOLERANCES: dict[str, float] = {
    "C01.rel": 0.05,
    "C01.overshoot": 0.05,
    "C02.abs": 1e-12,
    "C03.rel": 0.07,
    "C04.rel": 0.02,
    "C05.residual": 1e-3,
    "C05.threshold": 0.05,
    "C06.growth_slack": 0.1,
    "C06.omega_factor": 10.0,
    "C07.exact_rel": 0.1,
    "C07.hardy_rel": 0.15,
    "C08.agree_factor": 10.0,
    "C08.solver_tol": 1e-6,
    "C08.pseudo": 2e-5,
    "C09.margin": 0.0,
    "C09.mstar_slack": 1e-6,
    "C09.formula": 1e-12,
    "C09.m3_digits": 5e-5,
    "C10.hs_slack": 0.05,
    "C10.tr_slack": 0.1,
    "C11.slack": 0.1,
    "C12.identity": 1e-12,
    "C12.slack": 0.1,
    "C13.min_ratio": 1.8,
    "C14.rel": 1e-12,
}


@dataclass(frozen=True)
class Criterion:
    key: str
    scenario: str
    anchor: str
    run: Callable[[Tol, int], ScanResult]


def _rel_check(res: ScanResult, name: str, measured: float, target: float, rel: float,
               anchor: str) -> None:
    err = abs(measured - target) / abs(target)
    res.check(name, err <= rel, measured, target, f"rel <= {rel:g}", rel - err, anchor)


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------

def c01_strong_hardy(tol: Tol, seed: int) -> ScanResult:
    anchor = "delta = 4c^2/(d-2)^2 for b = c|x|^-2 x, a = I"
    res = ScanResult("C01_strong_form_bound")
    target = cst.hardy_delta(0.5, 3)
    res.predict("delta", target, anchor)
    ns, vals = [32, 64, 128], []
    for n in ns:
        g = Grid(3, n, 8.0, "dirichlet")
        b = dm.sample_drift(dm.Hardy(0.5, 1), g)
        vals.append(fb.estimate_delta_strong(b, dm.Identity(), 1e-3).delta_hat)
        logger.info("strong estimate at %d^3: %.6f", n, vals[-1])
    res.measured["delta_hat"] = vals[-1]
    res.add_series("refinement", n=ns, delta_hat=vals)
    _rel_check(res, "golden_value", vals[-1], target, tol["C01.rel"], anchor)
    over = tol["C01.overshoot"]
    mono = all(b > a for a, b in zip(vals, vals[1:])) and vals[-1] <= target * (1 + over)
    res.check("monotone_refinement", mono, vals[-1], target,
              f"increasing, <= target*(1+{over:g})", target * (1 + over) - vals[-1], anchor)
    return res.finish()


def c02_gamma_identity(tol: Tol, seed: int) -> ScanResult:
    anchor = "1/2 Gamma((d-2)/4)/Gamma((d+2)/4) = 2/(d-2)"
    res = ScanResult("C02_gamma_identity")
    ds = list(range(3, 11))
    lhs = [cst.gamma_quotient(d) for d in ds]
    rhs = [2.0 / (d - 2) for d in ds]
    err = max(abs(a - b) for a, b in zip(lhs, rhs))
    res.add_series("identity", d=ds, lhs=lhs, rhs=rhs)
    res.measured["max_error"] = err
    a = tol["C02.abs"]
    res.check("identity", err <= a, err, 0.0, f"<= {a:g}", a - err, anchor)
    return res.finish()


def c03_weak_hardy(tol: Tol, seed: int) -> ScanResult:
    anchor = "weak bound of |x|^-2 x: (2^(-1/2) Gamma((d-1)/4)/Gamma((d+1)/4))^2"
    res = ScanResult("C03_weak_form_bound")
    target = cst.weak_sqrt_delta(3) ** 2
    res.predict("delta_weak", target, anchor)
    ns, vals = [32, 64, 128], []
    for n in ns:
        g = Grid(3, n, 8.0, "dirichlet")
        b = dm.sample_drift(dm.Hardy(1.0, 1), g)
        vals.append(fb.estimate_delta_weak(b, 1e-3).delta_hat)
        logger.info("weak estimate at %d^3: %.6f", n, vals[-1])
    res.measured["delta_hat"] = vals[-1]
    res.add_series("refinement", n=ns, delta_hat=vals)
    _rel_check(res, "golden_value", vals[-1], target, tol["C03.rel"], anchor)
    return res.finish()


def c04_matrix_hardy(tol: Tol, seed: int) -> ScanResult:
    anchor = "inf <a grad h, grad h>/|| h/|x| ||^2 = (c+1)(d-2)^2/4, a = I + c xx/|x|^2"
    res = ScanResult("C04_matrix_hardy_constant")
    cs, vals, preds = [0.0, 1.0, 3.0], [], []
    for c in cs:
        v = rd.hardy_constant_rayleigh(c, 3)
        p = cst.matrix_hardy_constant(c, 3)
        vals.append(v)
        preds.append(p)
        res.predict(f"C(c={c:g})", p, anchor)
        _rel_check(res, f"c={c:g}", v, p, tol["C04.rel"], anchor)
    res.add_series("hardy_constant", c=cs, measured=vals, predicted=preds)
    return res.finish()


def c05_two_solutions(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C05_dirichlet_non_uniqueness")
    for c in (1.5, 0.5):
        sub = rd.dirichlet_two_solutions(c, 3, tol=tol["C05.residual"],
                                         threshold_tol=tol["C05.threshold"])
        res.absorb(sub, f"c={c:g}")
    return res.finish()


def c06_dichotomy(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C06_contraction_dichotomy")
    c = cst.hardy_c(2.25, 3)
    g = Grid(3, 32, 4.0)
    L = op.make_generator(dm.Identity(), dm.Hardy(c, 1), g)
    sub = sg.quasi_contractivity_scan(L, 2.25, 1.0, [5.0, 8.0], 1.0, 16,
                                      slack=tol["C06.growth_slack"])
    res.absorb(sub, "interval")
    sub = sg.accretivity_refinement_scan(c, 3, [32, 64, 128], 4.0, r=2.0, lam=1.0, sign=1,
                                         factor=tol["C06.omega_factor"])
    res.absorb(sub, "below_r_delta")
    return res.finish()


def c07_smoothing(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C07_smoothing_exponents")
    g = Grid(3, 64, 8.0)
    ts = [0.25, 0.5, 1.0, 2.0]
    L0 = op.make_generator(dm.Identity(), None, g)
    for r, q in [(1.0, math.inf), (2.0, math.inf)]:
        sub = sg.smoothing_exponent_fit(L0, r, q, ts, slack=tol["C07.exact_rel"], rel=True)
        res.absorb(sub, f"free_r={r:g}_q={q:g}")
    L = op.make_generator(dm.Identity(), dm.Hardy(cst.hardy_c(1.0, 3), 1), g)
    sub = sg.smoothing_exponent_fit(L, 2.0, 4.0, ts, slack=tol["C07.hardy_rel"], rel=True)
    res.absorb(sub, "hardy_r=2_q=4")
    return res.finish()


def _c8_setup():
    g = Grid(3, 32, 4.0)
    b = dm.sample_drift(dm.MollifiedHardy(0.2, 0.05, 1), g)
    f = np.exp(-g.radius ** 2) * (1 + 0.3 * g.coords[0])
    return g, b, f


def c08_resolvents(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C08_resolvent_equivalence")
    g, b, f = _c8_setup()
    lam, stol = 1.0, tol["C08.solver_tol"]
    L = op.make_generator(dm.Identity(), b, g)
    dw = fb.estimate_delta_weak(b, lam).delta_hat
    res.measured["delta_weak"] = dw
    agree = tol["C08.agree_factor"] * stol
    for zeta in (lam, lam * (1 + 1j)):
        u0 = rv.solve_direct(rv.ResolventPlan("direct", zeta, solver_tol=stol), L, f)
        for m in ("hille_lions", "weak_factor", "theta_r"):
            u = rv.resolve(rv.ResolventPlan(m, zeta, solver_tol=stol), b, f, g)
            e = float(np.linalg.norm(u - u0) / np.linalg.norm(u0))
            res.check(f"{m}@zeta={zeta}", e <= agree, e, 0.0, f"rel <= {agree:g}", agree - e,
                      "factorized resolvent equals (zeta + L)^-1")
        pr = rv.resolvent_norm_probe(rv.ResolventPlan("direct", zeta, solver_tol=1e-8), L)
        bound = 1.0 / (abs(zeta) * (1.0 - dw))
        res.check(f"norm@zeta={zeta}", pr.value <= bound, pr.value, bound, "<= bound",
                  bound - pr.value, "||R_zeta||_2 <= |zeta|^-1 (1 - delta)^-1")
    plan_tol = 1e-9

    def route(z, h):
        return rv.resolve(rv.ResolventPlan("weak_factor", z, solver_tol=plan_tol), b, h, g)

    samples = op.smooth_samples(g, 2, seed)
    sub = rv.pseudo_resolvent_audit(route, [lam, lam * (1 + 1j), 2 * lam], samples,
                                    tol["C08.pseudo"])
    res.absorb(sub, "weak_factor")
    return res.finish()


def c09_kernels(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C09_kernel_bounds")
    zs = [0.5, 1, 2, 4, 8, 16, 1 + 1j, 2 - 1j, 4 + 2j, 3 + 5j, 0.5 + 0.8j, 10 + 10j]
    rhos = np.geomspace(0.01, 10.0, 12)
    for w in ("A1", "A4"):
        res.absorb(kn.kernel_bound_audit(w, 3, zs, rhos, slack=-tol["C09.margin"]), w)
    sub = kn.kernel_bound_audit("mstar", 3, [], rhos, slack=tol["C09.mstar_slack"],
                                d_samples=range(3, 15))
    res.absorb(sub, "mstar")
    ftol = tol["C09.formula"]
    m3, m3_opt = cst.m_d(3), kn.m_d_by_optimization(3)
    res.predict("m_3", m3, "m_d = pi^(1/2) (2e)^(-1/2) d^(d/2) (d-1)^(-(d-1)/2)")
    res.measured["m_3_by_optimization"] = m3_opt
    e = abs(m3 - m3_opt)
    res.check("m_3_two_routes", e <= ftol, m3_opt, m3, f"<= {ftol:g}", ftol - e,
              "closed form against sup over alpha of the heat-kernel bound")
    dig = tol["C09.m3_digits"]
    e = abs(m3 - 1.9750)
    res.check("m_3_value", e <= dig, m3, 1.9750, f"<= {dig:g}", dig - e)
    ms = cst.m_d_star(3)
    e = abs(ms - math.pi / 2)
    res.check("m_3_star", e <= ftol, ms, math.pi / 2, f"<= {ftol:g}", ftol - e,
              "m_d* = (d-2)/2 sqrt(pi) Gamma((d-2)/2)/Gamma((d-1)/2)")
    return res.finish()


def c10_factor_norms(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C10_factor_norm_ceilings")
    g = Grid(3, 32, 4.0)
    lam = 1.0
    drifts = {"mollified": dm.MollifiedHardy(0.2, 0.05, 1), "hardy": dm.Hardy(0.25, 1)}
    for name, spec in drifts.items():
        b = dm.sample_drift(spec, g)
        dw = fb.estimate_delta_weak(b, lam).delta_hat
        res.measured[f"{name}.delta_weak"] = dw
        hs = rv.hs_norm_probe(b, lam).value
        cap = dw + tol["C10.hs_slack"]
        res.check(f"{name}.HS", hs <= cap, hs, dw, f"<= delta + {tol['C10.hs_slack']:g}",
                  cap - hs, "||H* S||_2 <= delta")
        for r in (2.0, 3.0):
            t = rv.tr_norm_probe(b, lam, r).value
            bound = cst.m_d(3) * cst.c_r(r) * dw
            cap = bound + tol["C10.tr_slack"]
            res.predict(f"{name}.T_r={r:g}", bound, "||T_r||_(r->r) <= m_d c_r delta")
            res.check(f"{name}.T_r={r:g}", t <= cap, t, bound,
                      f"<= bound + {tol['C10.tr_slack']:g}", cap - t,
                      "||T_r||_(r->r) <= m_d c_r delta")
    return res.finish()


def c11_gradient(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C11_gradient_exponents")
    g = Grid(3, 64, 2.0)
    mus = [4.0, 16.0, 64.0, 256.0]
    s = tol["C11.slack"]
    sub = kn.gradient_bound_scan(None, 2.0, mus, g, slack=s)
    res.absorb(sub, "free")
    c = 0.25
    b = dm.sample_drift(dm.Hardy(c, -1), g)
    sub = kn.gradient_bound_scan(b, 2.0, mus, g, delta_hat=cst.hardy_delta(c, 3), slack=s)
    res.absorb(sub, "hardy")
    return res.finish()


def c12_moser(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C12_moser_schedule")
    itol = tol["C12.identity"]
    worst = 0.0
    for r0, q, d in [(2.0, 2.2, 3), (3.0, 2.2, 3), (2.0, 3.0, 4), (4.0, 4.0, 5)]:
        sched = cst.moser_schedule(r0, q, d)
        worst = max(worst, sched.identity_error)
        res.check(f"schedule_r0={r0:g}_q={q:g}_d={d}", sched.ok, sched.gamma, 0.0,
                  "t > 1, r_n increasing, gamma_n -> gamma in (0, 1)", 0.0,
                  "gamma_n = r0 t^(n-1)/(x' r_n)")
    res.measured["identity_error"] = worst
    res.check("closed_forms", worst <= itol, worst, 0.0, f"<= {itol:g}", itol - worst,
              "alpha_n = (t^n - 1)/((t - 1) r_n)")
    g = Grid(3, 64, 1.0)
    sub = kn.moser_supbound_verify(0.25, g, [(1, 2), (2, 4), (4, 8), (8, 16)], 3.0, 2.2,
                                   slack=tol["C12.slack"])
    res.absorb(sub, "envelope")
    return res.finish()


def c13_approximation(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C13_approximation_convergence")
    g = Grid(3, 64, 1.0)
    f = np.exp(-g.radius ** 2 / 0.5 ** 2)
    ns = [1, 2, 4, 8, 16]
    mr = tol["C13.min_ratio"]
    eps0 = 0.02

    def trunc(n):
        return op.make_generator(dm.Identity(), dm.TruncatedHardy(0.5, n, 1), g)

    def coef(n):
        return op.make_generator(dm.Mollified(dm.RadialProjection(1.0), eps0 / n ** 2), None, g)

    c = cst.hardy_c(0.5, 3)

    def feller(n):
        return op.make_generator(dm.Identity(), dm.MollifiedHardy(c, eps0 / n ** 2, 1), g)

    for mode, fam in (("truncation", trunc), ("coefficients", coef)):
        sub = sg.drift_approximation_convergence(fam, f, 0.25, ns, r=4.0, min_ratio=mr, mode=mode)
        res.absorb(sub, mode)
    sub = sg.feller_sup_convergence(feller, f, [0.1, 0.5, 1.0], ns, 0.5, 3, min_ratio=mr)
    res.absorb(sub, "feller")
    return res.finish()


def c14_intervals(tol: Tol, seed: int) -> ScanResult:
    res = ScanResult("C14_interval_identities")
    rel = tol["C14.rel"]
    deltas = np.linspace(0.02, 5.0, 100)
    bad = {"threshold": 0, "inclusion": 0, "d_in_Ic": 0, "Is_empty": 0}
    worst = 0.0
    for d in (3, 4, 5):
        j = cst.sobolev_j(d)
        for delta in deltas:
            rep = cst.intervals(float(delta), d)
            th = cst.lr_threshold(cst.hardy_c(float(delta), d), d)
            lhs = rep.r_delta * j
            if math.isinf(lhs) or math.isinf(th):
                ok = math.isinf(lhs) and math.isinf(th)
            else:
                e = abs(lhs - th) / th
                worst = max(worst, e)
                ok = e <= rel
            bad["threshold"] += not ok
            ic, im = rep.I_c, rep.I_m
            bad["inclusion"] += not (ic is None or (im is not None and im[0] <= ic[0]))
            in_ic = ic is not None and ic[0] <= d
            bad["d_in_Ic"] += in_ic != (math.sqrt(delta) <= 2 * (d - 1) / d)
            bad["Is_empty"] += (rep.I_s is None) != (rep.m_d * delta >= 1)
    res.measured.update(max_rel_error=worst, **{f"violations.{k}": v for k, v in bad.items()})
    anchors = {
        "threshold": "r_delta j = d/(-alpha)",
        "inclusion": "I_c inside I_m",
        "d_in_Ic": "d in I_c iff sqrt(delta) <= 2(d-1)/d",
        "Is_empty": "I_s empty iff m_d delta >= 1",
    }
    for k, v in bad.items():
        res.check(k, v == 0, float(v), 0.0, f"0 violations (rel {rel:g})" if k == "threshold"
                  else "0 violations", float(-v), anchors[k])
    return res.finish()


CRITERIA: list[Criterion] = [
    Criterion("C01", "C01_strong_form_bound", "delta = 4c^2/(d-2)^2", c01_strong_hardy),
    Criterion("C02", "C02_gamma_identity", "1/2 Gamma((d-2)/4)/Gamma((d+2)/4) = 2/(d-2)",
              c02_gamma_identity),
    Criterion("C03", "C03_weak_form_bound", "weak bound of |x|^-2 x equals pi/2 in d = 3",
              c03_weak_hardy),
    Criterion("C04", "C04_matrix_hardy_constant", "(c+1)(d-2)^2/4", c04_matrix_hardy),
    Criterion("C05", "C05_dirichlet_non_uniqueness", "u = |x|^alpha - 1 solves L u = 0",
              c05_two_solutions),
    Criterion("C06", "C06_contraction_dichotomy", "omega_r = lam delta/(2(r-1)), r >= r_delta",
              c06_dichotomy),
    Criterion("C07", "C07_smoothing_exponents", "t^(-(d/2)(1/r - 1/q))", c07_smoothing),
    Criterion("C08", "C08_resolvent_equivalence", "(zeta + L)^-1 by three factorizations",
              c08_resolvents),
    Criterion("C09", "C09_kernel_bounds", "pointwise Bessel kernel bounds", c09_kernels),
    Criterion("C10", "C10_factor_norm_ceilings", "||H* S|| <= delta, ||T_r|| <= m_d c_r delta",
              c10_factor_norms),
    Criterion("C11", "C11_gradient_exponents", "(mu - lam0)^(-1/2), (mu - lam0)^(1/q - 1/2)",
              c11_gradient),
    Criterion("C12", "C12_moser_schedule", "||g||_inf <= B ||g||_(r0)^gamma", c12_moser),
    Criterion("C13", "C13_approximation_convergence", "Cauchy gaps of approximating semigroups",
              c13_approximation),
    Criterion("C14", "C14_interval_identities", "r_delta, I_c, I_m, I_s identities",
              c14_intervals),
]


def resolve_tolerances(overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    """Default tolerances with overrides applied; unknown names are rejected."""
    tol = dict(TOLERANCES)
    for k, v in (overrides or {}).items():
        if k not in tol:
            raise DomainError(f"unknown tolerance {k!r}")
        tol[k] = float(v)
    return tol


def run_criterion(key: str, overrides: Mapping[str, float] | None = None,
                  seed: int = 0x4B4F4C4D) -> ScanResult:
    tol = resolve_tolerances(overrides)
    for crit in CRITERIA:
        if crit.key == key:
            res = crit.run(tol, seed)
            res.anchors.setdefault("criterion", crit.anchor)
            return res
    raise KeyError(key)
