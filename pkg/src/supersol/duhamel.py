"""The Duhamel map ``F[v](t) = S(t)phi + int_0^t S(t-s) f(v(s)) ds`` and
monotone iteration from a supersolution.

Time integrals use product quadrature on a graded grid ``t_j = T (j/J)^gamma``:
``f(v)`` is frozen at each interval midpoint (``v`` there is the average of
the two neighbouring slices) and the semigroup factor is integrated exactly
mode by mode. On truncated whole space the semigroup factor is evaluated at
the midpoint instead. Both reduce to the recursion
``I_{j+1} = S(dt_j) I_j + (weight) g_j``, so one sweep costs O(J) transforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certificate import Certificate
from .field_core import NEGATIVE_ROUNDOFF, Domain, Field, Nonlinearity, compare_arrays
from .field_core import grid_to_modes, modes_to_grid
from .semigroup import SemigroupPlan

OVERFLOW_CAP = 1e12
RESIDUAL_TOL = 1e-6
MONOTONE_TOL = 1e-10


class MonotonicityError(RuntimeError):
    """An iterate rose above its predecessor by more than the tolerance."""

    def __init__(self, message: str, report: "IterationReport | None" = None):
        super().__init__(message)
        self.report = report


class NotSupersolutionError(ValueError):
    """Iteration refused: the starting field fails ``F[w] <= w``."""


def graded_time_grid(T: float, J: int = 64, gamma: float = 2.0) -> np.ndarray:
    if not T > 0 or not np.isfinite(T):
        raise ValueError(f"horizon must be positive and finite, got {T}")
    if J < 1 or gamma < 1:
        raise ValueError("need J >= 1 and grading exponent >= 1")
    return T * (np.arange(J + 1) / J) ** gamma


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Nonnegative slices ``values[j]`` at ``times[j]``, ``times[0] = 0``."""

    domain: Domain
    times: np.ndarray
    values: np.ndarray
    grading: float = 1.0
    overflow: bool = False

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must start at 0 and increase strictly")
        if v.shape != (t.size,) + self.domain.shape:
            raise ValueError(f"values shape {v.shape} does not match {(t.size,) + self.domain.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("space-time field has non-finite values")
        scale = max(1.0, float(np.abs(v).max()))
        if v.min() < -NEGATIVE_ROUNDOFF * scale * 100:
            raise ValueError(f"space-time field has negative value {v.min():.3e}")
        np.maximum(v, 0.0, out=v)
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_semigroup(cls, plan: SemigroupPlan, phi: Field, times, grading: float = 1.0) -> SpaceTimeField:
        """The linear flow ``t -> S(t) phi``."""
        times = np.asarray(times, dtype=float)
        vals = np.maximum(plan.evolve(phi, times), 0.0)
        vals[0] = phi.values
        return cls(plan.domain, times, vals, grading)

    @classmethod
    def from_function(cls, domain: Domain, times, fn, grading: float = 1.0) -> SpaceTimeField:
        """Slices ``fn(t, *coordinates)`` on the grid."""
        X = domain.coordinates()
        vals = np.array([np.broadcast_to(fn(t, *X), domain.shape) for t in times], dtype=float)
        return cls(domain, times, vals, grading)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def slice(self, j: int) -> Field:
        return Field(self.domain, self.values[j])

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time."""
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        if j >= len(self.times) - 1:
            return self.values[-1]
        t0, t1 = self.times[j], self.times[j + 1]
        lam = (t - t0) / (t1 - t0)
        return (1 - lam) * self.values[j] + lam * self.values[j + 1]

    def sup_trace(self) -> np.ndarray:
        return self.values.reshape(len(self.times), -1).max(axis=1)

    def with_values(self, values: np.ndarray, overflow: bool = False) -> SpaceTimeField:
        return SpaceTimeField(self.domain, self.times, values, self.grading, overflow)

    def scaled(self, c: float) -> SpaceTimeField:
        return self.with_values(self.values * c)


def apply_F(plan: SemigroupPlan, phi: Field, f: Nonlinearity, v: SpaceTimeField,
            cap: float = OVERFLOW_CAP) -> SpaceTimeField:
    """One application of the Duhamel map on the time grid of ``v``.

    Values of ``f(v)`` above ``cap`` are clipped and the result carries
    ``overflow=True`` rather than raising.
    """
    if v.domain != plan.domain or phi.domain != plan.domain:
        raise ValueError("plan, data and iterate must share a domain")
    times = v.times
    linear = np.maximum(plan.evolve(phi, times), 0.0)
    linear[0] = phi.values
    if f.is_zero or len(times) == 1:
        return v.with_values(linear)

    mid = 0.5 * (v.values[:-1] + v.values[1:])
    g = f(mid)
    overflow = bool(np.any(g > cap))
    if overflow:
        g = np.minimum(g, cap)
    dts = np.diff(times)
    integral = np.zeros_like(linear)

    if plan.spectral:
        lam = plan.eigenvalues
        ghat = grid_to_modes(plan.domain, g)
        acc = np.zeros_like(ghat[0])
        coeffs = np.zeros((len(times),) + ghat.shape[1:], dtype=ghat.dtype)
        for i, dt in enumerate(dts):
            z = lam * dt
            # (1 - e^{-z}) / z, exactly dt where z = 0
            phi1 = np.where(z > 0, -np.expm1(-z) / np.where(z > 0, z, 1.0), 1.0)
            acc = np.exp(-z) * acc + dt * phi1 * ghat[i]
            coeffs[i + 1] = acc
        integral[1:] = modes_to_grid(plan.domain, coeffs[1:])
    else:
        acc = np.zeros(plan.domain.shape)
        for i, dt in enumerate(dts):
            acc = plan.apply_values(acc, dt) + dt * plan.apply_values(g[i], dt / 2)
            integral[i + 1] = acc

    return v.with_values(np.maximum(linear + integral, 0.0), overflow=overflow)


def _scale(*fields: SpaceTimeField) -> float:
    return max([1.0] + [float(np.abs(w.values).max()) for w in fields])


def check_supersolution(plan: SemigroupPlan, phi: Field, f: Nonlinearity, w: SpaceTimeField,
                        tol: float = MONOTONE_TOL) -> Certificate:
    """Nodewise test of ``F[w] <= w + tol``.

    ``margin`` is ``min(w - F[w])`` over nodes where either side is nonzero,
    clipped at 0 for valid certificates (the raw value is kept in
    ``parameters['raw_margin']``).
    """
    Fw = apply_F(plan, phi, f, w)
    diff = w.values - Fw.values
    live = (w.values > 0) | (Fw.values > 0)
    raw = float(diff[live].min()) if np.any(live) else 0.0
    cmp = compare_arrays(plan.domain, Fw.values, w.values, tol)
    bad = np.any((Fw.values - w.values > tol).reshape(len(w.times), -1), axis=1)
    first_fail = float(w.times[np.argmax(bad)]) if np.any(bad) else None
    valid = cmp.dominated and not Fw.overflow
    margin = max(raw, 0.0) if valid else min(raw, -cmp.gap)
    return Certificate(
        "supersolution_check", valid, w.horizon if valid else (first_fail or 0.0), margin,
        parameters={"raw_margin": raw, "first_failing_time": first_fail, "tol": tol,
                    "worst_gap": cmp.gap},
        diagnostic="nonlinearity overflow" if Fw.overflow else "",
    )


@dataclass
class IterationReport:
    residual_history: list = field(default_factory=list)
    monotonicity_violations: list = field(default_factory=list)
    converged: bool = False
    iterations_used: int = 0
    overflow: bool = False

    def rows(self):
        return [(k + 1, r, m) for k, (r, m) in
                enumerate(zip(self.residual_history, self.monotonicity_violations))]


def monotone_solve(plan: SemigroupPlan, phi: Field, f: Nonlinearity, w0: SpaceTimeField,
                   tol: float = RESIDUAL_TOL, max_iter: int = 100, tol_mono: float = MONOTONE_TOL,
                   force: bool = False) -> tuple[SpaceTimeField, IterationReport]:
    """Iterate ``w_{k+1} = F[w_k]`` down from a supersolution.

    Returns the last iterate ``w_k`` whose update satisfied
    ``||F[w_k] - w_k||_inf <= tol``; being above its own image it is still a
    discrete supersolution. Without ``force`` a rise of more than ``tol_mono``
    between iterates aborts with :class:`MonotonicityError` (the first step
    failing is reported as :class:`NotSupersolutionError`).
    """
    report = IterationReport()
    w = w0
    mono_tol = tol_mono * _scale(w0)
    for k in range(max_iter):
        nxt = apply_F(plan, phi, f, w)
        report.iterations_used += 1
        rise = float((nxt.values - w.values).max())
        residual = float(np.abs(nxt.values - w.values).max())
        report.residual_history.append(residual)
        report.monotonicity_violations.append(max(rise, 0.0))
        if nxt.overflow:
            report.overflow = True
            return nxt, report
        if rise > mono_tol and not force:
            if k == 0:
                raise NotSupersolutionError(
                    f"starting field is not a supersolution: F[w0] exceeds w0 by {rise:.3e}")
            raise MonotonicityError(
                f"iterate {k + 1} rose by {rise:.3e} > {mono_tol:.1e}; time grid too coarse "
                "or start not a supersolution", report)
        if residual <= tol:
            report.converged = True
            return w, report
        w = nxt
    return w, report


def check_subsolution_chain(plan: SemigroupPlan, phi: Field, f: Nonlinearity, k_max: int,
                            T: float, J: int = 64, gamma: float = 2.0,
                            tol: float = MONOTONE_TOL, times=None) -> list[SpaceTimeField]:
    """``F^k[S(.)phi]`` for ``k = 0..k_max``; raises if the chain ever decreases.

    Stops early (last member flagged ``overflow``) if the nonlinearity overflows.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if times is None:
        times = graded_time_grid(T, J, gamma)
    chain = [SpaceTimeField.from_semigroup(plan, phi, times, gamma)]
    for k in range(k_max):
        nxt = apply_F(plan, phi, f, chain[-1])
        drop = float((chain[-1].values - nxt.values).max())
        chain.append(nxt)
        if nxt.overflow:
            break
        if drop > tol * _scale(nxt):
            raise MonotonicityError(f"subsolution chain decreased by {drop:.3e} at k={k + 1}")
    return chain
