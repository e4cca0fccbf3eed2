"""Closed-form constants and exponent intervals for singular-drift operators.

Everything here is a double-precision formula; the tests pin each value
against an independent evaluation (a different algebraic route or a 1-D
optimisation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gamma, gammaln

from .results import DomainError

INF = math.inf


def conjugate(r: float) -> float:
    """Hölder conjugate r' = r/(r-1); r = 1 maps to infinity."""
    if r <= 1:
        if r == 1:
            return INF
        raise DomainError(f"r={r} must be >= 1")
    if math.isinf(r):
        return 1.0
    return r / (r - 1.0)


def sobolev_j(d: int) -> float:
    """Sobolev gain j = d/(d-2)."""
    if d < 3:
        raise DomainError("j = d/(d-2) needs d >= 3")
    return d / (d - 2.0)


# --------------------------------------------------------------------------
# Hardy-type drifts
# --------------------------------------------------------------------------

def hardy_delta(c: float, d: int) -> float:
    """Form bound of c|x|^-2 x against -Delta: 4c^2/(d-2)^2."""
    return 4.0 * c * c / (d - 2.0) ** 2


def hardy_c(delta: float, d: int) -> float:
    """Inverse of :func:`hardy_delta`: c = (d-2)/2 * sqrt(delta)."""
    return 0.5 * (d - 2.0) * math.sqrt(delta)


def hardy_alpha(c: float, d: int) -> float:
    """Exponent of the non-constant radial zero of -Delta + c|x|^-2 x.grad."""
    return c - (d - 2.0)


def lr_threshold(c: float, d: int) -> float:
    """Integrability threshold d/(-alpha) of |x|^alpha near the origin."""
    a = hardy_alpha(c, d)
    if a >= 0:
        return INF
    return d / (-a)


def hardy_g_delta1(c: float, d: int) -> float:
    """Constant delta_1 = 4c/(d-2)^2 of the Jacobian condition for c|x|^-2 x."""
    return 4.0 * c / (d - 2.0) ** 2


def matrix_alpha(c: float, d: int) -> float:
    """Radial exponent solving (1+c) a(a-1) + (d-1) a = 0 with a != 0."""
    if c <= -1:
        raise DomainError("c must exceed -1")
    return 1.0 - (d - 1.0) / (1.0 + c)


def matrix_c_from_alpha(alpha: float, d: int) -> float:
    """c = (d-1)/(1-alpha) - 1, inverse of :func:`matrix_alpha`."""
    return (d - 1.0) / (1.0 - alpha) - 1.0


def matrix_delta(alpha: float, d: int) -> float:
    """Form bound 4(1 + alpha/(d-2))^2 of grad(a) for a = I + c xx/|x|^2."""
    return 4.0 * (1.0 + alpha / (d - 2.0)) ** 2


def matrix_delta_from_c(c: float, d: int) -> float:
    """Same constant written through b_a^2 / Hardy constant of a."""
    ba2 = ((d - 1.0) * c) ** 2 / (c + 1.0)
    return ba2 / matrix_hardy_constant(c, d)


def matrix_hardy_constant(c: float, d: int) -> float:
    """Sharp constant (c+1)(d-2)^2/4 of <grad h . a . grad h> >= C || h/|x| ||^2."""
    return (c + 1.0) * (d - 2.0) ** 2 / 4.0


# --------------------------------------------------------------------------
# intervals
# --------------------------------------------------------------------------

def r_delta(delta: float) -> float:
    """Left end 2/(2 - sqrt(delta)) of the contraction interval; inf if delta >= 4."""
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    s = math.sqrt(delta)
    if s >= 2:
        return INF
    return 2.0 / (2.0 - s)


def i_m_left(delta: float, d: int) -> float:
    """Left end of the bounded-solvability interval."""
    s = (d - 2.0) / d * math.sqrt(delta)
    if s >= 2:
        return INF
    return 2.0 / (2.0 - s)


def m_d(d: int) -> float:
    """Kernel constant pi^(1/2) (2e)^(-1/2) d^(d/2) (d-1)^(-(d-1)/2)."""
    return math.exp(0.5 * math.log(math.pi) - 0.5 * math.log(2 * math.e)
                    + 0.5 * d * math.log(d) - 0.5 * (d - 1) * math.log(d - 1))


def kappa_d(d: int) -> float:
    return d / (d - 1.0)


def c_r(r: float) -> float:
    """c_r = r r'/4."""
    return r * conjugate(r) / 4.0


def m_d_star(d: int) -> float:
    """Constant (d-2)/2 sqrt(pi) Gamma((d-2)/2)/Gamma((d-1)/2)."""
    return 0.5 * (d - 2) * math.sqrt(math.pi) * math.exp(
        gammaln((d - 2) / 2.0) - gammaln((d - 1) / 2.0))


def r_dq(d: int, q: float) -> float:
    """Rellich-type constant R_{d,q} (defined for d/(2q) > 1/2 and q > 1)."""
    a = d / (2.0 * q)
    args = (a - 0.5, d / 2.0 - a, (d + 1) / 2.0 - a, a)
    if min(args) <= 0:
        raise DomainError(f"R_(d,q) undefined for d={d}, q={q}")
    return 0.5 * gamma(args[0]) * gamma(args[1]) / (gamma(args[2]) * gamma(args[3]))


def r_minus_plus(delta: float, d: int) -> tuple[float, float] | None:
    """Endpoints 2/(1 +- sqrt(1 - m_d delta)); None when m_d delta >= 1."""
    x = m_d(d) * delta
    if x >= 1:
        return None
    s = math.sqrt(1.0 - x)
    return 2.0 / (1.0 + s), 2.0 / (1.0 - s) if s < 1 else INF


def gamma_quotient(d: int) -> float:
    """1/2 Gamma((d-2)/4)/Gamma((d+2)/4), the norm of |x|^-1 (-Delta)^(-1/2)."""
    return 0.5 * math.exp(gammaln((d - 2) / 4.0) - gammaln((d + 2) / 4.0))


def weak_sqrt_delta(d: int) -> float:
    """sqrt of the weak form bound of |x|^-2 x: 2^(-1/2) Gamma((d-1)/4)/Gamma((d+1)/4)."""
    return math.sqrt(0.5) * math.exp(gammaln((d - 1) / 4.0) - gammaln((d + 1) / 4.0))


def sum_rule(delta1: float, delta2: float) -> float:
    """Weak bound of b + f for b form bounded with delta1 and f Kato with delta2."""
    return (delta1 ** 0.25 + math.sqrt(delta2)) ** 2


def q_minus_plus(delta: float, delta1: float) -> tuple[float, float] | None:
    """Range ends (2 - sqrt(delta) -+ sqrt((2 - sqrt(delta))^2 - 4 delta1))/delta1."""
    s = 2.0 - math.sqrt(delta)
    disc = s * s - 4.0 * delta1
    if delta1 <= 0 or disc < 0:
        return None
    root = math.sqrt(disc)
    return (s - root) / delta1, (s + root) / delta1


def omega_r(delta: float, lam: float, r: float) -> float:
    """Growth bound lambda delta / (2 (r-1))."""
    if r <= 1:
        raise DomainError("r must exceed 1")
    if math.isinf(r):
        return 0.0
    return lam * delta / (2.0 * (r - 1.0))


def sector_k(delta: float, r: float) -> float:
    """Numerator constant of the sector bound, two-case formula."""
    rp = conjugate(r)
    sd = math.sqrt(delta)
    if r <= 2.0 * r_delta(delta):
        return abs(r - 2.0) / math.sqrt(r - 1.0) + rp * sd
    return (r - 2.0 + r * sd) / math.sqrt(r - 1.0)


def sector_tan(delta: float, r: float) -> float:
    """tan(theta) <= K (2 - r' sqrt(delta))^-1, for r in the open contraction interval."""
    rp = conjugate(r)
    den = 2.0 - rp * math.sqrt(delta)
    if den <= 0:
        raise DomainError(f"r={r} is not inside the open contraction interval")
    return sector_k(delta, r) / den


def varkappa(r: float) -> float:
    """sup over s in [0,1] of (1+s^(1/r))(1+s^(1/r'))(1+s^(1/2))^-2."""
    if r <= 1:
        raise DomainError("r must exceed 1")
    rp = conjugate(r)

    def f(s):
        return (1 + s ** (1 / r)) * (1 + s ** (1 / rp)) / (1 + math.sqrt(s)) ** 2

    res = minimize_scalar(lambda s: -f(s), bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-13})
    return max(f(0.0), f(1.0), -res.fun)


def im_re_ratio(r: float) -> float:
    """|r-2| / (2 sqrt(r-1)): bound of Im over Re of <A f, |f|^(r-1) sgn f>."""
    return abs(r - 2.0) / (2.0 * math.sqrt(r - 1.0))


def lower_lr_factor(r: float) -> float:
    """4/(r r')."""
    return 4.0 / (r * conjugate(r))


def extrapolate(M1: float, M2: float, nu: float, p: float, q: float,
                r: float) -> tuple[float, float]:
    """Exponent beta and constant M of the extrapolated (p -> r) bound."""
    if not (1 <= p < q < r):
        raise DomainError("need 1 <= p < q < r <= inf")
    if math.isinf(r):
        beta = (q - p) / q
    else:
        beta = (r / q) * (q - p) / (r - p)
    M = 2.0 ** (nu / (1.0 - beta) ** 2) * M1 * M2 ** (1.0 / (1.0 - beta))
    return beta, M


# --------------------------------------------------------------------------
# iteration schedule for the sup bound
# --------------------------------------------------------------------------

@dataclass
class IterationSchedule:
    r0: float
    q: float
    d: int
    x: float
    x_prime: float
    j: float
    t: float
    r_seq: np.ndarray
    r_closed: np.ndarray
    alpha_seq: np.ndarray
    alpha_closed: np.ndarray
    gamma_seq: np.ndarray
    gamma_closed: np.ndarray
    gamma: float
    alpha_bound: float
    identity_error: float = field(default=0.0)

    @property
    def ok(self) -> bool:
        return (self.t > 1 and bool(np.all(np.diff(self.r_seq) > 0))
                and 0 < self.gamma < 1
                and bool(np.all(self.gamma_seq > self.gamma))
                and float(self.gamma_seq.max()) < 1
                and bool(np.all(self.alpha_seq <= self.alpha_bound * (1 + 1e-12))))


def moser_schedule(r0: float, q: float, d: int, delta: float | None = None,
                   steps: int = 30) -> IterationSchedule:
    """Exponent schedule r_n, alpha_n, gamma_n of the L^r0 -> L^inf iteration.

    The sequences are generated by the recursion x'(r_{n+1} - 2) = j r_n and
    compared against their closed forms::

        r_n     = (t^n (r0/x' + 2) - t^(n-1) r0/x' - 2)/(t - 1)
        alpha_n = (t^n - 1) / ((t - 1) r_n)
        gamma_n = r0 t^(n-1) / (x' r_n)
    """
    j = sobolev_j(d)
    x = q * j / 2.0
    if x <= 1:
        raise DomainError("q j / 2 must exceed 1")
    xp = x / (x - 1.0)
    t = j / xp
    if t <= 1:
        raise DomainError(f"t = j/x' = {t} must exceed 1")
    if delta is not None:
        lo = max(r_delta(delta), d - 2.0)
        hi = 2.0 / math.sqrt(delta) if delta > 0 else INF
        if not (lo < q < hi):
            raise DomainError(f"q={q} outside ({lo}, {hi})")
        if r0 <= r_delta(delta):
            raise DomainError("r0 must exceed r_delta")
    n = np.arange(1, steps + 1, dtype=float)
    r = np.empty(steps)
    r[0] = r0 / xp + 2.0
    for i in range(1, steps):
        r[i] = (j * r[i - 1]) / xp + 2.0
    r_closed = (t ** n * (r0 / xp + 2.0) - t ** (n - 1) * r0 / xp - 2.0) / (t - 1.0)

    # alpha_n = alpha_{n-1}(1 - 2/r_n) + 1/r_n, gamma_n = prod(1 - 2/r_i)
    alpha = np.empty(steps)
    gam = np.empty(steps)
    a, g = 0.0, 1.0
    for i in range(steps):
        a = a * (1.0 - 2.0 / r[i]) + 1.0 / r[i]
        g = g * (1.0 - 2.0 / r[i])
        alpha[i], gam[i] = a, g
    alpha_closed = (t ** n - 1.0) / ((t - 1.0) * r_closed)
    gamma_closed = r0 * t ** (n - 1) / (xp * r_closed)
    gamma_lim = (1 - xp / j) / (1 - xp / j + 2 * xp / r0)
    alpha_lim = 1.0 / (r0 / xp + 2.0 - r0 / j)
    err = max(np.max(np.abs(r - r_closed) / r_closed),
              np.max(np.abs(alpha - alpha_closed) / alpha_closed),
              np.max(np.abs(gam - gamma_closed) / gamma_closed))
    return IterationSchedule(r0, q, d, x, xp, j, t, r, r_closed, alpha, alpha_closed,
                             gam, gamma_closed, gamma_lim, alpha_lim, float(err))


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass
class IntervalReport:
    delta: float
    d: int
    r_delta: float
    I_c: tuple[float, float] | None
    I_m: tuple[float, float] | None
    I_s: tuple[float, float] | None
    m_d: float
    kappa_d: float
    m_d_star: float
    q_minus_plus: tuple[float, float] | None = None

    def omega(self, lam: float, r: float) -> float:
        return omega_r(self.delta, lam, r)

    def sector(self, r: float) -> float:
        return sector_tan(self.delta, r)

    def as_dict(self) -> dict:
        return {
            "delta": self.delta, "d": self.d, "r_delta": self.r_delta,
            "I_c": self.I_c, "I_m": self.I_m, "I_s": self.I_s,
            "m_d": self.m_d, "kappa_d": self.kappa_d, "m_d_star": self.m_d_star,
            "q_minus_plus": self.q_minus_plus,
            "j": sobolev_j(self.d),
        }


def intervals(delta: float, d: int, delta1: float | None = None) -> IntervalReport:
    if delta <= 0:
        raise DomainError("delta must be positive")
    if d < 3:
        raise DomainError("d must be >= 3")
    rd = r_delta(delta)
    ic = None if math.isinf(rd) else (rd, INF)
    iml = i_m_left(delta, d)
    im = None if math.isinf(iml) else (iml, INF)
    qmp = q_minus_plus(delta, delta1) if delta1 is not None else None
    return IntervalReport(delta, d, rd, ic, im, r_minus_plus(delta, d), m_d(d),
                          kappa_d(d), m_d_star(d), qmp)


def misc_constants(d: int, r: float, q: float | None = None,
                   delta_pair: tuple[float, float] | None = None) -> dict:
    out = {
        "c_r": c_r(r),
        "kappa_d": kappa_d(d),
        "m_d": m_d(d),
        "m_d_star": m_d_star(d),
        "gamma_quotient": gamma_quotient(d),
        "two_over_d_minus_2": 2.0 / (d - 2.0),
        "weak_hardy_delta": weak_sqrt_delta(d) ** 2,
        "varkappa": varkappa(r),
    }
    if q is not None:
        try:
            out["R_dq"] = r_dq(d, q)
        except DomainError:
            out["R_dq"] = None
    if delta_pair is not None:
        d1, d2 = delta_pair
        out["sum_rule_delta"] = sum_rule(d1, d2)
        try:
            out["sector_K"] = sector_k(d2, r)
            out["sector_tan"] = sector_tan(d2, r)
        except DomainError:
            out["sector_tan"] = None
    return out
