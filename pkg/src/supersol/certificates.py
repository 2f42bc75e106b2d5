"""Closed-form existence conditions for ``u_t = Lap u + f(u)`` and the
supersolutions they produce.

Time integrals of sup-norm traces use the logarithmic-mean rule on each
interval (exact for exponential decay, which is what eigenfunction data
produce); a first interval starting at an infinite value is integrated by
fitting a power law through the next two nodes.

Global horizons on Dirichlet boxes close the tail with
``||S(T + tau) psi||_inf <= exp(-lambda_1 tau) * sum_k |psi_k(T)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .certificate import Certificate
from .duhamel import SpaceTimeField, graded_time_grid
from .field_core import DomainKind, Field, Nonlinearity, lq_norm
from .semigroup import SemigroupPlan

GAUGE_TOL = 1e-10


class GaugeError(ValueError):
    """``S(t) phi <= g(S(t) psi)`` fails on the sampled nodes."""


# -- constants and regimes ---------------------------------------------------

def cp_constant(p: float) -> float:
    """``(p-1)^(p-1) / p^p``, the maximum of ``(A-1)/A^p`` over ``A > 1``."""
    if not p > 1:
        raise ValueError(f"need p > 1, got {p}")
    return (p - 1) ** (p - 1) / p ** p


def optimal_A(p: float) -> float:
    if not p > 1:
        raise ValueError(f"need p > 1, got {p}")
    return p / (p - 1)


@dataclass(frozen=True)
class Classification:
    regime: str
    flagged: bool = False


@dataclass(frozen=True)
class CriticalExponent:
    q_c: float

    def classify(self, q: float) -> Classification:
        if math.isclose(q, self.q_c, rel_tol=1e-12, abs_tol=1e-12):
            # the critical statement needs q_c > 1
            return Classification("critical", flagged=not self.q_c > 1)
        return Classification("supercritical" if q > self.q_c else "subcritical")


def critical_exponent(n: int, p: float) -> CriticalExponent:
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return CriticalExponent(n * (p - 1) / 2)


# -- quadrature helpers ----------------------------------------------------------

def _interval_integrals(times: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Integral of ``g`` over each ``[t_i, t_{i+1}]``."""
    a, b = g[:-1], g[1:]
    dt = np.diff(times)
    out = np.empty_like(dt)
    for i in range(len(dt)):
        lo, hi = a[i], b[i]
        if math.isinf(lo) or math.isinf(hi):
            out[i] = math.inf
        elif lo > 0 and hi > 0 and not math.isclose(lo, hi, rel_tol=1e-12):
            out[i] = dt[i] * (hi - lo) / math.log(hi / lo)
        else:
            out[i] = dt[i] * 0.5 * (lo + hi)
    if times[0] == 0 and math.isinf(g[0]) and len(times) > 2:
        out[0] = _singular_head(times[1], times[2], g[1], g[2])
    return out


def _singular_head(t1: float, t2: float, g1: float, g2: float) -> float:
    """``int_0^t1 c s^beta ds`` for the power law through (t1, g1), (t2, g2)."""
    if g1 <= 0 or g2 <= 0:
        return 0.0
    if math.isinf(g1) or math.isinf(g2):
        return math.inf
    beta = math.log(g2 / g1) / math.log(t2 / t1)
    if beta <= -1:
        return math.inf
    return t1 * g1 / (beta + 1)


def cumulative_integral(times: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = np.zeros(len(times))
    if len(times) > 1:
        out[1:] = np.cumsum(_interval_integrals(np.asarray(times, float), np.asarray(g, float)))
    return out


def log_linear_grid(T: float, t_min: float = 1e-6, n_log: int = 60, n_lin: int = 400) -> np.ndarray:
    """0, a log-spaced run from ``t_min`` and a uniform run to ``T``."""
    if not T > t_min:
        raise ValueError("T must exceed t_min")
    head = np.logspace(math.log10(t_min), math.log10(T), n_log)
    body = np.linspace(0.0, T, n_lin + 1)
    return np.unique(np.concatenate([[0.0], head, body]))


def _sup_trace(plan: SemigroupPlan, psi: Field, times: np.ndarray) -> np.ndarray:
    vals = plan.evolve(psi, times)
    sups = np.maximum(vals.reshape(len(times), -1).max(axis=1), 0.0)
    if psi.singularity is not None:
        sups[times == 0] = math.inf
    return sups


def _tail_amplitude(plan: SemigroupPlan, psi: Field, T: float) -> float | None:
    """``sum_k |psi_k(T)|`` if the domain has a positive spectral gap."""
    if plan.domain.kind is not DomainKind.DIRICHLET_BOX:
        return None
    coeffs = plan.modes(psi) * plan.damping(T)
    return float(np.abs(coeffs).sum())


def _pow(x: np.ndarray, e: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = np.power(x, e)
    return np.where((x == 0) & (e == 0), 1.0, out)


# -- gauges and supersolutions ------------------------------------------------------

@dataclass(frozen=True)
class RegularityGauge:
    """Pair ``(g, psi)`` with ``S(t) phi <= g(S(t) psi)``.

    ``q`` is set for the power gauge ``g(s) = s^(1/q)``, ``psi = phi^q``.
    """

    g: Callable[[np.ndarray], np.ndarray]
    psi: Field
    q: float | None = None

    @classmethod
    def power(cls, phi: Field, q: float = 1.0) -> RegularityGauge:
        if q < 1:
            raise ValueError("gauge exponent must be >= 1")
        return cls(lambda s: np.power(np.maximum(s, 0.0), 1.0 / q), phi.power(q) if q != 1 else phi, q)


def _ratio_sup(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Per-slice sup of num/den with 0/0 = 0 and x/0 = inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return r.reshape(r.shape[0], -1).max(axis=1)


def build_prop32_supersolution(plan: SemigroupPlan, phi: Field, f: Nonlinearity,
                               gauge: RegularityGauge | None = None, A: float | None = None,
                               T: float = 1.0, times=None, J: int = 64, gamma: float = 2.0
                               ) -> tuple[SpaceTimeField, Certificate]:
    """Supersolution ``w = S(t)phi + S(t)psi * H(t)`` with ``H = int_0^t h``.

    ``h(t) = ||f(A g(S(t)psi)) / S(t)psi||_inf`` and the certificate holds when
    ``1 + ||S(t)psi / g(S(t)psi)||_inf H(t) <= A`` on every node. ``T = inf``
    asks for a global certificate; the grid then ends at ``30 / lambda_1``
    unless ``times`` is given and the tail is bounded analytically (power law
    with the power gauge on a Dirichlet box only).
    """
    gauge = gauge or RegularityGauge.power(phi, 1.0)
    A = optimal_A(f.p) if A is None and f.kind == "power_law" else A
    if A is None or not A > 1:
        raise ValueError("A must be > 1")
    if times is None:
        span = T
        if math.isinf(T):
            gap = plan.spectral_gap
            span = 30.0 / gap if gap > 0 else 30.0
        times = graded_time_grid(span, J, gamma)
    times = np.asarray(times, dtype=float)
    if not math.isinf(T) and not math.isclose(times[-1], T):
        raise ValueError("time grid must end at T")

    s_phi = np.maximum(plan.evolve(phi, times), 0.0)
    s_phi[0] = phi.values
    s_psi = np.maximum(plan.evolve(gauge.psi, times), 0.0)
    s_psi[0] = gauge.psi.values
    g_psi = gauge.g(s_psi)
    excess = s_phi - g_psi
    tol = GAUGE_TOL * max(1.0, float(s_phi.max()))
    if excess.max() > tol:
        idx = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise GaugeError(f"gauge inadmissible at t={times[idx[0]]:g}, node {idx[1:]}: "
                         f"S(t)phi exceeds g(S(t)psi) by {excess[idx]:.3e}")

    h = _ratio_sup(f(A * g_psi), s_psi)
    if gauge.psi.singularity is not None:
        h[0] = math.inf
    kappa = _ratio_sup(s_psi, g_psi)
    H = cumulative_integral(times, h)
    params = {"p": f.p if f.kind == "power_law" else math.nan,
              "q": gauge.q if gauge.q is not None else math.nan, "A": A}
    diagnostic = ""
    if np.any(np.isinf(h[1:])):
        diagnostic = "h(t) is infinite: f(A g(S psi)) > 0 where S psi vanishes"
    elif np.any(np.isinf(H)):
        diagnostic = "h is not integrable at t = 0"

    lhs = 1.0 + np.where(H > 0, kappa * H, 0.0)
    margins = A - lhs
    margin = float(np.min(margins)) if not diagnostic else -math.inf
    fails = margins < 0
    params["first_failing_time"] = float(times[np.argmax(fails)]) if np.any(fails) else None

    if math.isinf(T) and not diagnostic:
        tail = _prop32_tail(plan, gauge, f, A, times[-1], H[-1])
        if tail is None:
            diagnostic = "no analytic tail bound for this domain/gauge/nonlinearity"
            margin = -math.inf
        else:
            margin = min(margin, A - tail)

    H_fin = np.where(np.isfinite(H), H, 0.0)
    w_vals = s_phi + s_psi * H_fin[(slice(None),) + (None,) * plan.domain.n]
    w = SpaceTimeField(plan.domain, times, w_vals, gamma)
    valid = margin >= 0 and not diagnostic
    trace = tuple(zip(times.tolist(), h.tolist(), H.tolist(), lhs.tolist()))
    cert = Certificate("prop32", bool(valid), T if valid else float(times[-1]),
                       margin, params, trace, diagnostic)
    return w, cert


def _prop32_tail(plan, gauge, f, A, t_end, H_end) -> float | None:
    """Upper bound of ``1 + kappa(t) H(t)`` for all ``t >= t_end``."""
    if gauge.q is None or f.kind != "power_law":
        return None
    B = _tail_amplitude(plan, gauge.psi, t_end)
    if B is None:
        return None
    q, p, lam1 = gauge.q, f.p, plan.spectral_gap
    e = (p - q) / q
    if B == 0:
        tail_H = 0.0
    elif e <= 0:
        return None
    else:
        tail_H = A ** p * B ** e / (lam1 * e)
    kappa = 1.0 if q == 1 else B ** ((q - 1) / q)
    return 1.0 + kappa * (H_end + tail_H)


def build_prop31_supersolution(plan: SemigroupPlan, phi: Field, f: Nonlinearity, psi: Field,
                               h, times) -> tuple[SpaceTimeField, Certificate]:
    """``w = S(t)phi + S(t)psi int_0^t h`` checked directly against
    ``f(w) <= h(t) S(t)psi`` on every node. ``h`` is an array on ``times``
    or a callable of t."""
    times = np.asarray(times, dtype=float)
    h = np.asarray(h(times) if callable(h) else h, dtype=float)
    if h.shape != times.shape or np.any(h < 0):
        raise ValueError("h must be nonnegative and sampled on the time grid")
    s_phi = np.maximum(plan.evolve(phi, times), 0.0)
    s_phi[0] = phi.values
    s_psi = np.maximum(plan.evolve(psi, times), 0.0)
    s_psi[0] = psi.values
    H = cumulative_integral(times, h)
    bcast = (slice(None),) + (None,) * plan.domain.n
    w_vals = s_phi + s_psi * H[bcast]
    slack = h[bcast] * s_psi - f(w_vals)
    margin = float(slack.min())
    w = SpaceTimeField(plan.domain, times, w_vals)
    cert = Certificate("prop31", margin >= 0, float(times[-1]), margin,
                       {"p": getattr(f, "p", math.nan)})
    return w, cert


# -- the P functional and friends ------------------------------------------------

@dataclass(frozen=True)
class CondPResult:
    """``values[j]`` is the bracket at ``times[j]``; ``running`` its running max."""

    times: np.ndarray
    values: np.ndarray
    running: np.ndarray
    sup: float
    certificate: Certificate


def condp_functional(plan: SemigroupPlan, phi: Field, p: float, q: float,
                     time_grid=None) -> CondPResult:
    """Evaluate ``||S(t)phi^q||^((q-1)/q) int_0^t ||S(s)phi^q||^((p-q)/q) ds``.

    The certificate is valid when the bracket stays below ``C_p`` on an
    initial stretch of the grid; its horizon is where it first crosses
    (refined by bisection), the end of the grid, or ``inf`` when the
    Dirichlet tail bound closes the integral.
    """
    if not p > 1 or q < 1:
        raise ValueError(f"need p > 1 and q >= 1, got p={p}, q={q}")
    cp = cp_constant(p)
    psi = phi.power(q) if q != 1 else phi
    times = np.asarray(time_grid if time_grid is not None else log_linear_grid(1.0), dtype=float)
    params = {"p": p, "q": q, "A": optimal_A(p), "C_p": cp}
    e_int, e_pre = (p - q) / q, (q - 1) / q
    diagnostic = "q > p: integrand exponent negative" if e_int < 0 else ""

    if psi.is_zero:
        zeros = np.zeros(len(times))
        cert = Certificate("condp", True, math.inf, cp, params, diagnostic=diagnostic)
        return CondPResult(times, zeros, zeros, 0.0, cert)

    sups = _sup_trace(plan, psi, times)
    integrand = _pow(sups, e_int)
    I = cumulative_integral(times, integrand)
    with np.errstate(invalid="ignore"):
        bracket = np.where(I > 0, _pow(sups, e_pre) * I, 0.0)
    bracket = np.where(np.isnan(bracket), math.inf, bracket)
    running = np.maximum.accumulate(bracket)
    P_sup = float(running[-1])
    params["P_sup"] = P_sup
    trace = tuple(zip(times.tolist(), bracket.tolist()))

    over = np.nonzero(bracket > cp)[0]
    if over.size == 0:
        horizon, margin = float(times[-1]), cp - P_sup
        B = _tail_amplitude(plan, psi, times[-1])
        if B is not None and e_int > 0:
            lam1 = plan.spectral_gap
            tail = B ** e_pre * (I[-1] + B ** e_int / (lam1 * e_int))
            params["P_inf_bound"] = max(P_sup, tail)
            if params["P_inf_bound"] <= cp:
                horizon, margin = math.inf, cp - params["P_inf_bound"]
        cert = Certificate("condp", True, horizon, margin, params, trace, diagnostic)
        return CondPResult(times, bracket, running, P_sup, cert)

    j = int(over[0])
    if j <= 1 or math.isinf(bracket[j - 1]):
        cert = Certificate("condp", False, 0.0, cp - float(bracket[j]), params, trace,
                           diagnostic or "bracket exceeds C_p at the first grid node")
        return CondPResult(times, bracket, running, P_sup, cert)

    horizon, value = _refine_crossing(plan, psi, times[j - 1], times[j], I[j - 1],
                                      integrand[j - 1], e_int, e_pre, cp)
    cert = Certificate("condp", True, horizon, cp - value, params, trace, diagnostic)
    return CondPResult(times, bracket, running, P_sup, cert)


def _refine_crossing(plan, psi, t_lo, t_hi, I_lo, g_lo, e_int, e_pre, cp, iters=60):
    """Bisect for the last time in ``[t_lo, t_hi)`` where the bracket is <= cp."""
    def bracket_at(t):
        s = max(float(plan.evolve(psi, [t])[0].max()), 0.0)
        seg = _interval_integrals(np.array([t_lo0, t]), np.array([g_lo, s ** e_int]))[0]
        return s ** e_pre * (I_lo + seg)

    t_lo0 = t_lo
    value_lo = bracket_at(t_lo)
    for _ in range(iters):
        mid = 0.5 * (t_lo + t_hi)
        val = bracket_at(mid)
        if val <= cp:
            t_lo, value_lo = mid, val
        else:
            t_hi = mid
        if t_hi - t_lo <= 1e-12 * t_hi:
            break
    return t_lo, min(value_lo, cp)


def supercritical_existence_time(norm_phi_q: float, n: int, p: float, q: float, A: float) -> float:
    """Largest t with ``1 + A^p ||phi||_q^(p-1) t^theta <= A``,
    ``theta = 1 - n(p-1)/(2q)``."""
    theta = 1 - n * (p - 1) / (2 * q)
    if theta <= 0:
        raise ValueError(f"not supercritical: theta = {theta:g} <= 0")
    if not A > 1:
        raise ValueError("A must be > 1")
    if norm_phi_q == 0:
        return math.inf
    return ((A - 1) / (A ** p * norm_phi_q ** (p - 1))) ** (1 / theta)


def supercritical_certificate(phi: Field, p: float, q: float, A: float | None = None) -> Certificate:
    n = phi.domain.n
    A = optimal_A(p) if A is None else A
    norm = lq_norm(phi, q)
    params = {"p": p, "q": q, "A": A, "norm_phi_q": norm}
    try:
        T = supercritical_existence_time(norm, n, p, q, A)
    except ValueError as exc:
        return Certificate("supercritical_smth", False, 0.0, -math.inf, params, diagnostic=str(exc))
    if math.isinf(norm):
        return Certificate("supercritical_smth", False, 0.0, -math.inf, params,
                           diagnostic="phi is not in L^q")
    if math.isinf(T):
        # zero data: the inequality holds for every t but the reading is local
        return Certificate("supercritical_smth", True, 1e300, A - 1, params)
    return Certificate("supercritical_smth", True, T, 0.0, params)


def subcritical_sufficient(plan: SemigroupPlan, phi: Field, p: float, q: float,
                           time_grid) -> Certificate:
    """``t^(1/(p-1)) ||S(t)phi^q||_inf^(1/q) <= C_p^(1/(p-1))`` on the grid."""
    if not q > 1:
        raise ValueError("needs q > 1")
    times = np.asarray(time_grid, dtype=float)
    psi = phi.power(q)
    sups = _sup_trace(plan, psi, times)
    with np.errstate(invalid="ignore"):
        m = np.where(times > 0, times ** (1 / (p - 1)) * sups ** (1 / q), 0.0)
    bound = cp_constant(p) ** (1 / (p - 1))
    worst = float(m.max())
    params = {"p": p, "q": q, "bound": bound, "max": worst}
    return Certificate("subcritical_suff", worst <= bound, float(times[-1]), bound - worst,
                       params, tuple(zip(times.tolist(), m.tolist())))


@dataclass(frozen=True)
class NecessaryMonitor:
    times: np.ndarray
    values: np.ndarray
    bound: float
    first_violation: float | None
    p: float

    @property
    def trace(self):
        return list(zip(self.times.tolist(), self.values.tolist()))

    def certificate(self) -> Certificate:
        worst = float(self.values.max())
        return Certificate("necessary_cond", self.first_violation is None, float(self.times[-1]),
                           self.bound - worst, {"p": self.p, "first_violation": self.first_violation})


def necessary_condition_monitor(plan: SemigroupPlan, phi: Field, p: float, time_grid) -> NecessaryMonitor:
    """Track ``t^(1/(p-1)) ||S(t)phi||_inf`` against ``(1/(p-1))^(1/(p-1))``.

    Exceeding the bound at ``t`` rules out any nonnegative integral solution
    living up to ``t``.
    """
    if not p > 1:
        raise ValueError("need p > 1")
    times = np.asarray(time_grid, dtype=float)
    sups = _sup_trace(plan, phi, times)
    with np.errstate(invalid="ignore"):
        nu = np.where(times > 0, times ** (1 / (p - 1)) * sups, 0.0)
    bound = (1 / (p - 1)) ** (1 / (p - 1))
    over = np.nonzero(nu > bound)[0]
    first = float(times[over[0]]) if over.size else None
    return NecessaryMonitor(times, nu, bound, first, p)


@dataclass(frozen=True)
class UffProbe:
    times: np.ndarray
    uff: np.ndarray
    conv: np.ndarray
    alpha: float
    uff_slope: float
    conv_slope: float

    @property
    def trend(self) -> str:
        return _trend(self.uff_slope, self.alpha)

    @property
    def conv_trend(self) -> str:
        return _trend(self.conv_slope, self.alpha)


def _trend(slope: float, alpha: float) -> str:
    return "decreasing" if slope > alpha / 2 else "stagnating"


def _small_time_slope(times: np.ndarray, values: np.ndarray) -> float:
    pos = (times > 0) & (values > 0)
    t, v = times[pos], values[pos]
    if t.size < 2:
        return math.nan
    head = t <= t[0] * 10
    if head.sum() < 2:
        head[:2] = True
    return float(np.polyfit(np.log(t[head]), np.log(v[head]), 1)[0])


def uff_probe(plan: SemigroupPlan, phi: Field, p: float, q: float, time_grid) -> UffProbe:
    """Traces of ``t^a ||S(t)phi^q||_p^(1/q)`` and ``t^a ||S(t)phi||_pq`` near
    ``t = 0`` with ``a = 1/(p-1) - n/(2pq)``, plus their small-time log slopes."""
    n = plan.domain.n
    lo, hi = n * (p - 1) / (2 * p), n * (p - 1) / 2
    if not lo < q < hi:
        raise ValueError(f"q={q} outside the subcritical window ({lo:g}, {hi:g})")
    alpha = 1 / (p - 1) - n / (2 * p * q)
    if alpha <= 0:
        raise ValueError(f"alpha = {alpha:g} <= 0")
    times = np.asarray(time_grid, dtype=float)
    if np.any(times <= 0):
        raise ValueError("uff probe needs strictly positive times")
    psi = phi.power(q)
    s_psi = np.maximum(plan.evolve(psi, times), 0.0)
    s_phi = np.maximum(plan.evolve(phi, times), 0.0)
    uff = np.array([t ** alpha * lq_norm(Field(plan.domain, v), p) ** (1 / q)
                    for t, v in zip(times, s_psi)])
    conv = np.array([t ** alpha * lq_norm(Field(plan.domain, v), p * q)
                     for t, v in zip(times, s_phi)])
    return UffProbe(times, uff, conv, alpha, _small_time_slope(times, uff),
                    _small_time_slope(times, conv))


def sufficiency_gap(p: float) -> float:
    """Ratio of the sufficient bound to the necessary one; reported only."""
    return cp_constant(p) ** (1 / (p - 1)) * (p - 1) ** (1 / (p - 1))
