"""Scenario runner and report emission (index JSON, per-scenario CSV, slope SVGs)."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import acceptance as ac
from . import constants as cst
from . import drifts as dm
from . import formbound as fb
from . import kernels as kn
from . import operators as op
from . import radial as rd
from . import resolvent as rv
from . import semigroup as sg
from .config import ConfigError, ScenarioConfig, parse_floats, parse_list
from .results import DomainError, ScanResult, jsonable
from .spectral import Grid

logger = logging.getLogger(__name__)


@dataclass
class Context:
    """What an op sees: the grid, the generator coefficients and the seed."""

    grid: Grid
    drift: dm.DriftSpec
    matrix: dm.MatrixSpec
    seed: int


@dataclass(frozen=True)
class OpSpec:
    params: dict[str, tuple[Callable[[str], Any], Any]]
    tolerances: dict[str, float]
    run: Callable[[Context, dict, dict], ScanResult]


def _opt_float(text: str) -> float | None:
    return None if str(text).strip().lower() in ("", "none", "auto") else float(text)


# --------------------------------------------------------------------------
# ops
# --------------------------------------------------------------------------

def _op_constants(ctx: Context, p: dict, tol: dict) -> ScanResult:
    d, delta = ctx.grid.dim, p["delta"]
    res = ScanResult("constants")
    rep = cst.intervals(delta, d)
    res.measured.update(rep.as_dict())
    res.measured.update(cst.misc_constants(d, p["r"], p["q"]))
    res.measured["omega_r"] = cst.omega_r(delta, p["lam"], p["r"]) if p["r"] >= rep.r_delta else None
    e = abs(cst.gamma_quotient(d) - 2.0 / (d - 2))
    res.check("gamma_identity", e <= tol["identity"], e, 0.0, f"<= {tol['identity']:g}",
              tol["identity"] - e, "1/2 Gamma((d-2)/4)/Gamma((d+2)/4) = 2/(d-2)")
    th = cst.lr_threshold(cst.hardy_c(delta, d), d)
    lhs = rep.r_delta * cst.sobolev_j(d)
    if math.isinf(th):
        ok, e = math.isinf(lhs), 0.0
    else:
        e = abs(lhs - th) / th
        ok = e <= tol["identity"]
    res.predict("lr_threshold", th, "d/(-alpha), alpha = c - (d-2)")
    res.check("threshold_identity", ok, lhs, th, f"rel <= {tol['identity']:g}",
              tol["identity"] - e, "r_delta j = d/(-alpha)")
    incl = rep.I_c is None or (rep.I_m is not None and rep.I_m[0] <= rep.I_c[0])
    res.check("Ic_in_Im", incl, float(incl), 1.0, "inclusion", 0.0, "I_c inside I_m")
    return res.finish()


def _op_formbound(ctx: Context, p: dict, tol: dict) -> ScanResult:
    g = ctx.grid
    b = dm.sample_drift(ctx.drift, g)
    lam = p["lam"]
    res = ScanResult("formbound")
    kinds = parse_list(p["kind"])
    if "strong" in kinds:
        res.measured["strong"] = fb.estimate_delta_strong(b, ctx.matrix, lam).delta_hat
    if "weak" in kinds:
        res.measured["weak"] = fb.estimate_delta_weak(b, lam).delta_hat
    if "kato" in kinds:
        res.measured["kato"] = fb.kato_norm(b, lam).delta_hat
    if "audit" in kinds:
        res.absorb(fb.inclusion_audit(b, lam, slack=tol["slack"]), "inclusion")
    if isinstance(ctx.drift, dm.Hardy) and isinstance(ctx.matrix, dm.Identity):
        res.predict("strong", cst.hardy_delta(ctx.drift.c, g.dim), "4c^2/(d-2)^2")
    return res.finish()


def _op_resolve(ctx: Context, p: dict, tol: dict) -> ScanResult:
    g = ctx.grid
    b = dm.sample_drift(ctx.drift, g)
    zeta = complex(p["zeta_re"], p["zeta_im"])
    stol = p["solver_tol"]
    f = np.exp(-g.radius ** 2)
    L = op.make_generator(ctx.matrix, b, g)
    res = ScanResult("resolve")
    u0 = rv.solve_direct(rv.ResolventPlan("direct", zeta, solver_tol=stol), L, f)
    res.measured["norm_direct"] = g.norm2(u0)
    agree = tol["agree_factor"] * stol
    for m in parse_list(p["methods"]):
        if m == "direct":
            continue
        if not isinstance(ctx.matrix, dm.Identity):
            raise DomainError("factorized routes need a = I")
        info = rv.SolveInfo()
        u = rv.resolve(rv.ResolventPlan(m, zeta, solver_tol=stol), b, f, g, info)
        e = float(np.linalg.norm(u - u0) / np.linalg.norm(u0))
        res.measured[f"{m}.ratio"] = info.ratio
        res.check(m, e <= agree, e, 0.0, f"rel <= {agree:g}", agree - e,
                  "factorized resolvent equals (zeta + L)^-1")
    return res.finish()


def _op_evolve(ctx: Context, p: dict, tol: dict) -> ScanResult:
    g = ctx.grid
    L = op.make_generator(ctx.matrix, ctx.drift, g)
    delta = p["delta"]
    if delta is None:
        b = dm.sample_drift(ctx.drift, g)
        delta = fb.estimate_delta_strong(b, ctx.matrix, p["lam"]).delta_hat
    res = ScanResult("evolve")
    res.measured["delta_hat"] = delta
    sub = sg.quasi_contractivity_scan(L, delta, p["lam"], parse_floats(p["r"]), p["t"],
                                      p["steps"], slack=tol["slack"])
    res.absorb(sub, "growth")
    return res.finish()


def _op_radial(ctx: Context, p: dict, tol: dict) -> ScanResult:
    grid = rd.RadialGrid(p["rho_min"], 1.0, p["points"])
    res = ScanResult("radial")
    sub = rd.dirichlet_two_solutions(p["c"], ctx.grid.dim, p["case"], grid,
                                     tol["residual"], tol["threshold"])
    res.absorb(sub, "dirichlet")
    if p["case"] in ("matrix", "matrix_divergence"):
        v = rd.hardy_constant_rayleigh(p["c"], ctx.grid.dim)
        pred = cst.matrix_hardy_constant(p["c"], ctx.grid.dim)
        e = abs(v - pred) / pred
        res.predict("hardy_constant", pred, "(c+1)(d-2)^2/4")
        res.check("hardy_constant", e <= tol["hardy_rel"], v, pred, f"rel <= {tol['hardy_rel']:g}",
                  tol["hardy_rel"] - e, "(c+1)(d-2)^2/4")
    return res.finish()


def _op_kernels(ctx: Context, p: dict, tol: dict) -> ScanResult:
    d = ctx.grid.dim
    rhos = np.geomspace(p["rho_min"], p["rho_max"], p["rho_points"])
    rng = np.random.default_rng(ctx.seed)
    k = p["zeta_points"]
    # seeded samples of the half-plane, |arg zeta| <= 1.2
    zs = list(rng.uniform(0.25, 16.0, k) * np.exp(1j * rng.uniform(-1.2, 1.2, k)))
    res = ScanResult("kernels")
    for w in parse_list(p["which"]):
        if w == "mstar":
            sub = kn.kernel_bound_audit(w, d, [], rhos, slack=tol["mstar_slack"],
                                        d_samples=range(3, 3 + p["rho_points"]))
        else:
            sub = kn.kernel_bound_audit(w, d, zs, rhos, slack=-tol["margin"])
        res.absorb(sub, w)
    return res.finish()


def _op_regularity(ctx: Context, p: dict, tol: dict) -> ScanResult:
    g = ctx.grid
    b = None if isinstance(ctx.drift, dm.Zero) else dm.sample_drift(ctx.drift, g)
    delta = p["delta"]
    if delta is None:
        delta = 0.0 if b is None else fb.estimate_delta_strong(b, dm.Identity(), 1.0).delta_hat
    res = ScanResult("regularity")
    res.measured["delta_hat"] = delta
    sub = kn.gradient_bound_scan(b, p["q"], parse_floats(p["mu"]), g, delta_hat=delta,
                                 slack=tol["slack"])
    res.absorb(sub, "gradient")
    return res.finish()


OPS: dict[str, OpSpec] = {
    "constants": OpSpec({"delta": (float, 1.0), "lam": (float, 1.0), "r": (float, 2.0),
                         "q": (float, 4.0)}, {"identity": 1e-12}, _op_constants),
    "formbound": OpSpec({"lam": (float, 1.0), "kind": (str, "strong,weak")},
                        {"slack": 0.05}, _op_formbound),
    "resolve": OpSpec({"zeta_re": (float, 1.0), "zeta_im": (float, 0.0),
                       "methods": (str, "hille_lions,weak_factor,theta_r"),
                       "solver_tol": (float, 1e-6)}, {"agree_factor": 10.0}, _op_resolve),
    "evolve": OpSpec({"t": (float, 1.0), "steps": (int, 16), "r": (str, "5,8"),
                      "lam": (float, 1.0), "delta": (_opt_float, None)},
                     {"slack": 0.1}, _op_evolve),
    "radial": OpSpec({"c": (float, 0.5), "case": (str, "drift"), "points": (int, 4096),
                      "rho_min": (float, 1e-4)},
                     {"residual": 1e-3, "threshold": 0.05, "hardy_rel": 0.02}, _op_radial),
    "kernels": OpSpec({"which": (str, "A1,A4,mstar"), "rho_min": (float, 0.01),
                       "rho_max": (float, 10.0), "rho_points": (int, 12),
                       "zeta_points": (int, 12)},
                      {"margin": 0.0, "mstar_slack": 1e-6}, _op_kernels),
    "regularity": OpSpec({"q": (float, 2.0), "mu": (str, "4,16,64,256"),
                          "delta": (_opt_float, None)}, {"slack": 0.1}, _op_regularity),
}

OP_PARAMS = {k: v.params for k, v in OPS.items()}


def _tolerances_for(op_name: str, overrides: Mapping[str, float]) -> dict[str, float]:
    """Op defaults, then bare-key overrides, then ``op.key`` overrides."""
    tol = dict(OPS[op_name].tolerances)
    for k, v in overrides.items():
        if "." not in k and k in tol:
            tol[k] = float(v)
    for k, v in overrides.items():
        scope, _, key = k.rpartition(".")
        if scope == op_name:
            tol[key] = float(v)
    return tol


def _check_tolerance_names(cfg: ScenarioConfig) -> None:
    for k in cfg.tolerances:
        scope, _, key = k.rpartition(".")
        if scope:
            if scope not in cfg.ops:
                raise ConfigError(f"tol.{k}: op {scope!r} not in scenario.ops")
            if key not in OPS[scope].tolerances:
                raise ConfigError(f"tol.{k}: unknown tolerance")
        elif not any(key in OPS[o].tolerances for o in cfg.ops):
            raise ConfigError(f"tol.{k}: no listed op has this tolerance")


def make_context(cfg: ScenarioConfig) -> Context:
    try:
        grid = Grid(cfg.dim, cfg.n, cfg.box, cfg.boundary)
    except DomainError as exc:
        raise ConfigError(f"grid: {exc}") from None
    try:
        drift = dm.parse_drift(cfg.drift)
    except DomainError as exc:
        raise ConfigError(f"generator.drift: {exc}") from None
    try:
        matrix = dm.parse_matrix(cfg.matrix)
    except DomainError as exc:
        raise ConfigError(f"generator.matrix: {exc}") from None
    return Context(grid, drift, matrix, cfg.seed)


def run_scenario(cfg: ScenarioConfig) -> ScanResult:
    """Run the listed ops in order and merge them into one result."""
    ctx = make_context(cfg)
    _check_tolerance_names(cfg)
    res = ScanResult(cfg.id)
    for name in cfg.ops:
        spec = OPS[name]
        params = {k: v[1] for k, v in spec.params.items()}
        params.update(cfg.params.get(name, {}))
        sub = spec.run(ctx, params, _tolerances_for(name, cfg.tolerances))
        res.absorb(sub, name)
    res.finish()
    if cfg.out:
        emit_report([res], cfg.out)
    return res


def run_suite(keys: Sequence[str] | None = None, overrides: Mapping[str, float] | None = None,
              seed: int = 0x4B4F4C4D, progress: Callable[[ScanResult, str], None] | None = None
              ) -> list[ScanResult]:
    """Run acceptance criteria in order; ``progress`` sees each result as it finishes."""
    tol = ac.resolve_tolerances(overrides)
    wanted = set(keys) if keys else None
    if wanted:
        unknown = wanted - {c.key for c in ac.CRITERIA}
        if unknown:
            raise ConfigError(f"suite: unknown criteria {sorted(unknown)}")
    out = []
    for crit in ac.CRITERIA:
        if wanted and crit.key not in wanted:
            continue
        res = crit.run(tol, seed)
        res.anchors.setdefault("criterion", crit.anchor)
        out.append(res)
        if progress:
            progress(res, crit.key)
    return out


# --------------------------------------------------------------------------
# emission
# --------------------------------------------------------------------------

def summary_margin(res: ScanResult) -> float:
    """Smallest finite margin over the checks (nan when none is finite)."""
    vals = [c.margin for c in res.checks if math.isfinite(c.margin)]
    return min(vals) if vals else float("nan")


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def write_csv(res: ScanResult, path: str) -> None:
    """Long-format table: section, name, field, row, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["section", "name", "field", "row", "value"])
        for c in res.checks:
            for k in ("passed", "measured", "target", "margin"):
                w.writerow(["check", c.name, k, 0, repr(getattr(c, k))])
        for name in sorted(res.series):
            for col, vals in res.series[name].items():
                for i, v in enumerate(vals):
                    w.writerow(["series", name, col, i, repr(v)])


def emit_report(results: Sequence[ScanResult], out_dir: str) -> list[str]:
    """Write index.json, one CSV per scenario and one SVG per fitted slope."""
    if not results:
        raise DomainError("emit_report needs at least one result")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"output directory {out_dir!r} is not writable: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir!r} is not writable")
    from . import plotting

    files = []
    index: dict[str, Any] = {}
    for res in results:
        stem = _safe(res.scenario)
        path = os.path.join(out_dir, stem + ".csv")
        write_csv(res, path)
        files.append(path)
        for fit_name, fit in sorted(res.fits.items()):
            path = os.path.join(out_dir, f"{stem}__{_safe(fit_name)}.svg")
            plotting.slope_plot(res.series[fit["series"]], fit, f"{res.scenario}: {fit_name}", path)
            files.append(path)
        entry = res.as_dict(include_runtime=False)
        entry["status"] = "pass" if res.passed else "fail"
        entry["margin"] = summary_margin(res)
        index[res.scenario] = entry
    path = os.path.join(out_dir, "index.json")
    with open(path, "w") as fh:
        json.dump(jsonable(index), fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")
    files.append(path)
    return files
