"""Estimators for the relative bound of a drift in three classes.

* strong:  delta = || b_a (lam + A)^(-1/2) ||^2
* weak:    delta = || |b|^(1/2) (lam - Delta)^(-1/4) ||^2
* Kato:    delta = || |b| (lam - Delta)^(-1/2) ||_(1 -> 1)

The first two are top eigenvalues of symmetric nonnegative operators and
are found by power iteration, whose Rayleigh quotients are lower bounds of
the eigenvalue at every step. The Kato norm is a max column sum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator, cg

from . import constants as cst
from . import drifts as dm
from . import operators as op
from . import spectral as sp
from .results import DomainError, NumericalError, ScanResult
from .spectral import Grid, VectorField

logger = logging.getLogger(__name__)

Array = np.ndarray


@dataclass
class FormBoundReport:
    class_kind: str
    delta_hat: float
    lam: float
    iterations: int
    residual: float
    grid_tag: str
    tolerance: float = 1e-8
    history: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"class_kind": self.class_kind, "lambda": self.lam, "delta_hat": self.delta_hat,
                "iterations": self.iterations, "residual": self.residual,
                "tolerance": self.tolerance, "grid": self.grid_tag}


@dataclass
class PowerResult:
    value: float
    vector: Array
    iterations: int
    residual: float
    history: list[float]


def power_iteration(apply: Callable[[Array], Array], x0: Array,
                    inner: Callable[[Array, Array], float] | None = None,
                    tol: float = 1e-8, max_iter: int = 10_000,
                    rayleigh: Callable[[Array, Array], float] | None = None) -> PowerResult:
    """Top eigenvalue of a nonnegative self-adjoint operator.

    Stops when successive Rayleigh quotients agree to ``tol`` (relative).
    ``rayleigh(x, Kx)`` may override the default quotient <Kx, x>/<x, x>,
    e.g. for generalized problems.
    """
    if inner is None:
        def inner(a, b):
            return float(np.vdot(b, a).real)
    x = x0 / math.sqrt(inner(x0, x0))
    q_old = -math.inf
    hist: list[float] = []
    for it in range(1, max_iter + 1):
        y = apply(x)
        q = rayleigh(x, y) if rayleigh is not None else inner(y, x) / inner(x, x)
        hist.append(q)
        ny = math.sqrt(inner(y, y))
        if ny == 0.0:
            return PowerResult(0.0, x, it, 0.0, hist)
        if abs(q - q_old) <= tol * abs(q):
            r = y - q * x
            res = math.sqrt(max(inner(r, r), 0.0)) / max(abs(q), 1e-300)
            return PowerResult(q, x, it, res, hist)
        q_old = q
        x = y / ny
    raise NumericalError("power iteration stagnated", achieved=q, history=hist)


def _start_vector(weight: Array, smoother: Callable[[Array], Array]) -> Array:
    x0 = smoother(np.sqrt(np.abs(weight)) + 1e-3 * np.abs(weight).max() ** 0.5)
    return np.real(x0)


def estimate_delta_strong(b: VectorField, a: dm.MatrixSpec, lam: float, grid: Grid | None = None,
                          tol: float = 1e-8, max_iter: int = 10_000,
                          cg_tol: float = 1e-10) -> FormBoundReport:
    """Top eigenvalue of (lam + A)^(-1/2) b_a^2 (lam + A)^(-1/2).

    For a = I the square root is the exact multiplier. For other a the same
    eigenvalue is found from the generalized problem b_a^2 v = delta (lam + A) v,
    iterating v <- (lam + A)^(-1) b_a^2 v with conjugate gradients and the
    quotient <b_a^2 v, v>/<(lam + A) v, v>.
    """
    grid = grid or b.grid
    if lam <= 0:
        raise DomainError("lambda must be positive")
    w = dm.b_a_field(b, a).values ** 2
    if not np.any(w):
        return FormBoundReport("strong", 0.0, lam, 0, 0.0, grid.tag(), tol)
    if isinstance(a, dm.Identity):
        sym = (lam + grid.k2) ** -0.5

        def K(x):
            return sp.apply_symbol(grid, w * sp.apply_symbol(grid, x, sym), sym)

        x0 = _start_vector(w, lambda v: sp.apply_symbol(grid, v, sym))
        pr = power_iteration(K, x0, tol=tol, max_iter=max_iter)
    else:
        A = op.assemble_A(a, grid)
        n = w.size
        dinv = 1.0 / (lam + A.diag.ravel())
        Lop = LinearOperator((n, n), matvec=lambda v: (lam * v + A(v.reshape(grid.shape)).ravel()))
        M = LinearOperator((n, n), matvec=lambda v: dinv * v)

        def K(x):
            sol, info = cg(Lop, (w * x).ravel(), rtol=cg_tol, atol=0.0, M=M, maxiter=5000)
            if info != 0:
                raise NumericalError("CG failed inside the strong estimator")
            return sol.reshape(grid.shape)

        def rq(x, y):
            return float(np.vdot(x, w * x).real / np.vdot(x, lam * x + A(x)).real)

        x0 = _start_vector(w, lambda v: v)
        pr = power_iteration(K, x0, tol=tol, max_iter=max_iter, rayleigh=rq)
        # re-evaluate the quotient at the returned vector
        pr.value = rq(pr.vector, None)
    logger.info("strong estimate %.6g after %d iterations", pr.value, pr.iterations)
    return FormBoundReport("strong", pr.value, lam, pr.iterations, pr.residual, grid.tag(),
                           tol, pr.history)


def estimate_delta_weak(b: VectorField, lam: float, grid: Grid | None = None,
                        tol: float = 1e-8, max_iter: int = 10_000) -> FormBoundReport:
    """Top eigenvalue of (lam - Delta)^(-1/4) |b| (lam - Delta)^(-1/4)."""
    grid = grid or b.grid
    if lam <= 0:
        raise DomainError("lambda must be positive")
    w = b.magnitude()
    if not np.any(w):
        return FormBoundReport("weak_half", 0.0, lam, 0, 0.0, grid.tag(), tol)
    sym = (lam + grid.k2) ** -0.25

    def K(x):
        return sp.apply_symbol(grid, w * sp.apply_symbol(grid, x, sym), sym)

    x0 = _start_vector(w, lambda v: sp.apply_symbol(grid, v, sym))
    pr = power_iteration(K, x0, tol=tol, max_iter=max_iter)
    return FormBoundReport("weak_half", pr.value, lam, pr.iterations, pr.residual, grid.tag(),
                           tol, pr.history)


def kato_kernel_array(grid: Grid, lam: float, beta: float = 0.5) -> Array:
    """Bessel kernel (lam - Delta)^(-beta)(x - y) on the lattice of node differences.

    Distances use the nearest periodic image. The zero-distance entry holds the
    mean of the kernel over the ball with the volume of one cell.
    """
    from .kernels import bessel_kernel_table, ball_mean

    d, h, n = grid.dim, grid.h, grid.n
    m = sfft.fftfreq(n, 1.0 / n)  # integer offsets in FFT order
    off = np.meshgrid(*([m * h] * d), indexing="ij", sparse=True)
    rho = np.sqrt(sum(o * o for o in off))
    rho = np.broadcast_to(rho, grid.shape)
    rmax = float(rho.max())
    table = bessel_kernel_table(beta, lam, d, h * 0.5, rmax * 1.01)
    K = np.where(rho > 0, table(np.where(rho > 0, rho, h)), 0.0)
    R = (math.gamma(d / 2 + 1) / math.pi ** (d / 2)) ** (1.0 / d) * h  # equal-volume ball
    K[(0,) * d] = ball_mean(beta, lam, d, R)
    return K


def kato_norm(b: VectorField, lam: float, grid: Grid | None = None) -> FormBoundReport:
    """max_y sum_x |b(x)| k(x - y) h^d for the Bessel kernel k of (lam - Delta)^(-1/2)."""
    grid = grid or b.grid
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if grid.boundary != "periodic":
        raise DomainError("the Kato norm uses the periodic lattice convolution")
    w = b.magnitude()
    if not np.any(w):
        return FormBoundReport("kato", 0.0, lam, 0, 0.0, grid.tag())
    K = kato_kernel_array(grid, lam)
    conv = np.real(sfft.ifftn(sfft.fftn(w) * sfft.fftn(K))) * grid.cell_volume
    return FormBoundReport("kato", float(conv.max()), lam, 1, 0.0, grid.tag())


def inclusion_audit(b: VectorField, lam: float, f: VectorField | None = None,
                    slack: float = 0.05, scenario: str = "inclusion_audit") -> ScanResult:
    """Check Kato => weak, strong => weak, and the sum rule for b + f."""
    grid = b.grid
    res = ScanResult(scenario)
    dw = estimate_delta_weak(b, lam).delta_hat
    ds = estimate_delta_strong(b, dm.Identity(), lam).delta_hat
    dk = kato_norm(b, lam).delta_hat
    res.measured.update(weak=dw, strong=ds, kato=dk)
    res.check("kato_implies_weak", dw <= dk + slack, dw, dk, f"<= kato + {slack}", dk + slack - dw,
              "interpolation of the 1->1 and inf->inf bounds")
    res.check("strong_implies_weak", dw <= math.sqrt(ds) + slack, dw, math.sqrt(ds),
              f"<= sqrt(strong) + {slack}", math.sqrt(ds) + slack - dw, "Heinz inequality")
    if f is not None:
        both = VectorField(grid, b.components + f.components)
        dwsum = estimate_delta_weak(both, lam).delta_hat
        dkf = kato_norm(f, lam).delta_hat
        rhs = ds ** 0.25 + math.sqrt(dkf)
        res.measured.update(weak_sum=dwsum, kato_f=dkf)
        res.predict("sum_rule_sqrt_delta", rhs, "sqrt(delta) = delta_1^(1/4) + sqrt(delta_2)")
        res.check("sum_rule", math.sqrt(dwsum) <= rhs + slack, math.sqrt(dwsum), rhs,
                  f"<= rhs + {slack}", rhs + slack - math.sqrt(dwsum))
    return res.finish()


def mollification_stability(b: VectorField, a: dm.MatrixSpec, eps_list: Sequence[float],
                            lam: float, rel_slack: float = 0.05,
                            scenario: str = "mollification_stability") -> ScanResult:
    """delta(E_eps b against E_eps a) <= delta(b against a) (1 + rel_slack)."""
    res = ScanResult(scenario)
    base = estimate_delta_strong(b, a, lam).delta_hat
    res.measured["delta_base"] = base
    vals = []
    for eps in eps_list:
        bm = dm.mollify_drift(b, eps)
        am = a if isinstance(a, dm.Identity) else dm.Mollified(a, eps)
        de = estimate_delta_strong(bm, am, lam).delta_hat
        vals.append(de)
        res.check(f"eps={eps:g}", de <= base * (1 + rel_slack) + 1e-12, de, base,
                  f"<= base*(1+{rel_slack})", base * (1 + rel_slack) - de,
                  "pointwise inequalities for heat-mollified coefficients")
    res.add_series("mollified_delta", eps=list(eps_list), delta=vals)
    return res.finish()


def relative_bound_probe(b: VectorField, a: dm.MatrixSpec, lam: float, r: float,
                         C: float, W_norm: float = 0.0, probes: int = 64,
                         seed: int = 0x4B4F4C4D) -> dict:
    """Random-probe lower estimate of || b.grad (lam + A)^(-1) ||_(r -> r).

    Probes are seeded smooth fields whose correlation length matches the
    resolvent scale lam^(-1/2). The quantitative bound asserted is the
    bounded part 4 (C/((r-1) lam))^(1/2); the unbounded part enters only
    qualitatively because its constant is not explicit.
    """
    grid = b.grid
    d = grid.dim
    if not (1 < r <= 2 * d / (d + 2)):
        raise DomainError(f"r={r} outside (1, 2d/(d+2)]")
    if not isinstance(a, dm.Identity):
        raise DomainError("the probe is implemented for a = I")
    sym = 1.0 / (lam + grid.k2)
    rng = np.random.default_rng(seed)
    best = 0.0
    smooth = np.exp(-grid.k2 / (4.0 * lam))
    for _ in range(probes):
        hfield = sp.apply_symbol(grid, rng.standard_normal(grid.shape), smooth)
        u = sp.apply_symbol(grid, hfield, sym)
        bu = op.apply_drift(b.components, u, grid)
        ratio = sp.lp_norm(bu, r, grid) / sp.lp_norm(hfield, r, grid)
        best = max(best, ratio)
    bound = 4.0 * math.sqrt(C / ((r - 1.0) * lam))
    return {"probe": best, "bound_C_part": bound, "W_norm": W_norm,
            "passes": bool(best <= bound) if W_norm == 0 else None}
