"""Reference solver: exact diffusion / explicit reaction Lie splitting.

One step is ``u <- S(dt)(u + dt f(u))``. It shares nothing with the Duhamel
quadrature except the semigroup itself, which makes it a fair referee for
the certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .duhamel import SpaceTimeField
from .field_core import Field, Nonlinearity
from .semigroup import SemigroupPlan

BLOW_UP_THRESHOLD = 1e8
MAX_GROWTH = 1.2
MIN_DT = 1e-12
# on step underflow, a reaction escape time below this counts as blow-up
ESCAPE_HORIZON = 1e-9


@dataclass
class OracleRun:
    """Trajectory plus per-step sup norms.

    ``outcome`` is ``completed``, ``blow_up`` or ``cap_exceeded``; for blow-up
    ``bracket = (t_lo, t_hi)`` holds the last bounded and first unbounded step.
    """

    trajectory: SpaceTimeField
    sup_trace: np.ndarray
    dt_used: np.ndarray
    outcome: str
    t_end: float
    t_star: float | None = None
    bracket: tuple[float, float] | None = None
    notes: list = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.outcome == "blow_up"

    def rows(self):
        return [(float(t), float(s), float(d))
                for (t, s), d in zip(self.sup_trace, self.dt_used)]

    def summary(self) -> str:
        if self.outcome == "blow_up":
            return f"blow_up t_star={self.t_star:.11e} bracket=[{self.bracket[0]:.11e}, {self.bracket[1]:.11e}]"
        return f"{self.outcome} T={self.t_end:.11e}"


def solve_reference(plan: SemigroupPlan, phi: Field, f: Nonlinearity, T: float, dt: float,
                    record_times=None, threshold: float = BLOW_UP_THRESHOLD) -> OracleRun:
    """Integrate to ``T`` with base step ``dt``.

    The step is halved whenever the reaction substep would raise the sup
    norm by more than 20%, and is never enlarged again. For fast growth the
    halving underflows before the sup norm reaches ``threshold``; the run is
    then called a blow-up when ``y' = f(y)`` started at the current sup norm
    escapes within ``ESCAPE_HORIZON`` (``t_star`` adds that escape time),
    and ``cap_exceeded`` otherwise. If ``record_times``
    is given the steps are clipped to land on them and only those slices are
    stored; otherwise every step is stored.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T > 0:
        raise ValueError("T must be positive")
    notes = []
    if phi.singularity is not None:
        notes.append("singular data integrated from its capped grid values")
    record = None if record_times is None else np.asarray(record_times, dtype=float)
    if record is not None and (record[0] != 0 or record[-1] > T + 1e-12):
        raise ValueError("record_times must start at 0 and end by T")

    u = np.array(phi.values, dtype=float)
    t = 0.0
    times, slices = [0.0], [u.copy()]
    sups, dts = [(0.0, float(u.max()))], [0.0]
    next_rec = 1
    step = dt
    outcome, t_star, bracket = "completed", None, None

    while t < T * (1 - 1e-14):
        target = T if record is None or next_rec >= len(record) else record[next_rec]
        h = min(step, target - t)
        fu = f(u)
        top = float(u.max())
        while True:
            grown = float((u + h * fu).max())
            if grown <= MAX_GROWTH * top or top == 0.0 or h < MIN_DT:
                break
            step = h = h / 2
        if h < MIN_DT:
            escape = f.escape_time(top)
            if escape <= ESCAPE_HORIZON:
                outcome, t_star, bracket = "blow_up", t + escape, (t, t + escape)
                notes.append(f"step underflow at sup norm {top:.3e}; reaction escapes in {escape:.3e}")
            else:
                outcome = "cap_exceeded"
                notes.append(f"step fell below {MIN_DT:g} at t={t:.6e}")
            break
        u = plan.apply_values(u + h * fu, h)
        np.maximum(u, 0.0, out=u)
        t_prev, t = t, t + h
        if math.isclose(t, target, rel_tol=1e-13, abs_tol=1e-15):
            t = target
        top = float(u.max())
        sups.append((t, top))
        dts.append(h)
        if not math.isfinite(top) or top > threshold:
            outcome, t_star, bracket = "blow_up", t, (t_prev, t)
            break
        if record is None:
            times.append(t)
            slices.append(u.copy())
        elif next_rec < len(record) and t == record[next_rec]:
            times.append(t)
            slices.append(u.copy())
            next_rec += 1

    traj = SpaceTimeField(plan.domain, np.array(times), np.array(slices))
    return OracleRun(traj, np.array(sups), np.array(dts), outcome, t, t_star, bracket, notes)


@dataclass(frozen=True)
class SandwichReport:
    """``lower_gap = max(lower - u)``, ``upper_gap = max(u - upper)``; both <= tol when ok."""

    ok: bool
    lower_gap: float
    upper_gap: float
    lower_worst: tuple
    upper_worst: tuple


def sandwich_validate(run: OracleRun | SpaceTimeField, lower: SpaceTimeField | None,
                      upper: SpaceTimeField | None, tol: float) -> SandwichReport:
    """Check ``lower - tol <= u <= upper + tol`` on the certificate grid.

    ``run`` may be an oracle run (its trajectory is interpolated linearly in
    time onto the certificate nodes) or a solution already on that grid.
    """
    traj = run.trajectory if isinstance(run, OracleRun) else run
    ref = lower if lower is not None else upper
    if ref is None:
        raise ValueError("need at least one bound")
    for bound in (lower, upper):
        if bound is None:
            continue
        if bound.domain != traj.domain:
            raise ValueError("bounds and solution live on different grids")
        if bound.horizon > traj.horizon * (1 + 1e-12):
            raise ValueError(f"solution ends at {traj.horizon:g} before the bound horizon {bound.horizon:g}")
        if lower is not None and upper is not None and not np.array_equal(lower.times, upper.times):
            raise ValueError("lower and upper bounds use different time grids")

    times = ref.times
    if np.array_equal(traj.times, times):
        u = traj.values
    else:
        u = np.array([traj.at(min(t, traj.horizon)) for t in times])

    def worst(diff):
        idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
        return float(diff[idx]), (float(times[idx[0]]),) + tuple(int(i) for i in idx[1:])

    lo_gap, lo_at = worst(lower.values - u) if lower is not None else (-math.inf, ())
    up_gap, up_at = worst(u - upper.values) if upper is not None else (-math.inf, ())
    return SandwichReport(lo_gap <= tol and up_gap <= tol, lo_gap, up_gap, lo_at, up_at)
