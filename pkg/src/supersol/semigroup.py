"""Heat semigroup on boxes and on truncated whole space.

Dirichlet and periodic boxes use the full discrete sine/Fourier basis of the
grid with the continuous eigenvalues ``|k|^2``, so eigenfunctions decay
exactly. On truncated whole space the Gaussian kernel is applied by
trapezoid quadrature, one axis at a time, with each kernel row normalised by
its sum over the infinite lattice.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .field_core import (
    Domain,
    DomainKind,
    Field,
    Singularity,
    grid_to_modes,
    lq_norm,
    modes_to_grid,
)


@dataclass(frozen=True, eq=False)
class SemigroupPlan:
    """Precomputed data for applying ``S(t)`` on one domain.

    ``eigenvalues`` has the broadcast shape of the coefficient array (None on
    whole space); ``spectral_gap`` is the smallest eigenvalue.
    """

    domain: Domain
    eigenvalues: np.ndarray | None
    tail_tolerance: float

    @property
    def spectral(self) -> bool:
        return self.eigenvalues is not None

    @property
    def spectral_gap(self) -> float:
        if self.eigenvalues is None:
            return 0.0
        return float(self.eigenvalues.min())

    def modes(self, f: Field) -> np.ndarray:
        """Spectral coefficients of ``f``, exact for 1D Dirichlet singular data."""
        sing = f.singularity
        if (sing is not None and self.domain.kind is DomainKind.DIRICHLET_BOX
                and self.domain.n == 1):
            return _singular_sine_coefficients(self.domain, sing)
        return grid_to_modes(self.domain, f.values)

    def damping(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(-np.multiply.outer(t, self.eigenvalues))

    def apply_values(self, values: np.ndarray, t: float) -> np.ndarray:
        """``S(t)`` on raw grid arrays (leading axes are a batch), no clamping."""
        if t < 0:
            raise ValueError(f"negative time {t}")
        if t == 0:
            return np.array(values, dtype=float)
        if self.spectral:
            coeffs = grid_to_modes(self.domain, values)
            return modes_to_grid(self.domain, coeffs * self.damping(t))
        self._check_tail(values)
        out = np.asarray(values, dtype=float)
        for axis in range(self.domain.n):
            K = _kernel_matrix(self.domain, axis, float(t))
            moved = np.moveaxis(out, out.ndim - self.domain.n + axis, -1)
            out = np.moveaxis(moved @ K.T, -1, out.ndim - self.domain.n + axis)
        return out

    def evolve(self, f: Field, times) -> np.ndarray:
        """Grid values of ``S(t) f`` for every t in ``times`` (unclamped)."""
        times = np.asarray(times, dtype=float)
        if np.any(times < 0):
            raise ValueError("negative time in grid")
        out = np.empty((len(times),) + self.domain.shape)
        if self.spectral:
            coeffs = self.modes(f)
            pos = times > 0
            if np.any(pos):
                out[pos] = modes_to_grid(self.domain, coeffs * self.damping(times[pos]))
            out[~pos] = f.values
            return out
        for j, t in enumerate(times):
            out[j] = self.apply_values(f.values, t)
        return out

    def apply(self, f: Field, t: float) -> Field:
        if f.domain != self.domain:
            raise ValueError("field and plan live on different domains")
        if t < 0:
            raise ValueError(f"negative time {t}")
        if t == 0:
            return f
        if self.spectral:
            raw = self.evolve(f, [t])[0]
        else:
            raw = self.apply_values(f.values, t)
        return Field(self.domain, np.maximum(raw, 0.0))

    def _check_tail(self, values: np.ndarray) -> None:
        mask = self.domain.boundary_mask()
        edge = np.max(np.abs(values[..., mask])) if values.size else 0.0
        top = np.max(np.abs(values)) if values.size else 0.0
        if edge > self.tail_tolerance * max(top, 1e-300):
            raise ValueError(
                f"field is {edge:.2e} on the truncation boundary (tolerance "
                f"{self.tail_tolerance:g} relative); enlarge the truncation radius")


def make_plan(domain: Domain) -> SemigroupPlan:
    if domain.kind is DomainKind.WHOLE_SPACE_TRUNCATED:
        return SemigroupPlan(domain, None, domain.tail_tolerance)
    ks = domain.wavenumbers()
    grids = np.meshgrid(*[k ** 2 for k in ks], indexing="ij")
    lam = np.sum(grids, axis=0)
    lam.setflags(write=False)
    return SemigroupPlan(domain, lam, domain.tail_tolerance)


@functools.lru_cache(maxsize=256)
def _kernel_matrix(domain: Domain, axis: int, t: float) -> np.ndarray:
    x = domain.axes[axis]
    h = domain.spacing[axis]
    d = x[:, None] - x[None, :]
    K = np.exp(-d ** 2 / (4 * t))
    # lattice sum of exp(-(jh)^2 / 4t), makes S(t) of a constant exact on the lattice
    jmax = int(math.ceil(12 * math.sqrt(2 * t) / h)) + 1
    j = np.arange(-jmax, jmax + 1)
    K /= np.exp(-(j * h) ** 2 / (4 * t)).sum()
    K.setflags(write=False)
    return K


@functools.lru_cache(maxsize=64)
def _singular_sine_coefficients(domain: Domain, sing: Singularity) -> np.ndarray:
    """Sine amplitudes of ``c |x - x0|^-a`` on ``[0, L]`` for every grid mode.

    Uses ``int_0^X v^-a e^{iv} dv = X^(1-a)/(1-a) 1F1(1-a; 2-a; iX)``.
    """
    L = domain.side_lengths[0]
    x0 = sing.center[0]
    a = sing.exponent
    omega = domain.wavenumbers()[0]

    def cos_sin_moment(B):
        if B <= 0:
            return np.zeros_like(omega, dtype=complex)
        X = omega * B
        return omega ** (a - 1) * X ** (1 - a) / (1 - a) * special.hyp1f1(1 - a, 2 - a, 1j * X)

    right = cos_sin_moment(L - x0)
    left = cos_sin_moment(x0)
    b = (np.sin(omega * x0) * (right.real + left.real)
         + np.cos(omega * x0) * (right.imag - left.imag))
    out = 2 * sing.amplitude / L * b
    out.setflags(write=False)
    return out


def apply_semigroup(plan: SemigroupPlan, f: Field, t: float) -> Field:
    return plan.apply(f, t)


def _check_time_grid(time_grid) -> np.ndarray:
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("time grid must be a nonempty 1D sequence")
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be nonnegative and strictly increasing")
    return times


def sup_norm_trace(plan: SemigroupPlan, f: Field, time_grid) -> np.ndarray:
    """Rows ``(t, ||S(t) f||_inf)``."""
    times = _check_time_grid(time_grid)
    values = plan.evolve(f, times)
    sups = values.reshape(len(times), -1).max(axis=1)
    if f.singularity is not None:
        sups = np.where(times == 0, math.inf, sups)
    return np.column_stack([times, np.maximum(sups, 0.0)])


@dataclass(frozen=True)
class SmoothingProbe:
    times: np.ndarray
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    def rows(self):
        return [(float(t), float(r)) for t, r in zip(self.times, self.ratios)]


def smoothing_probe(plan: SemigroupPlan, f: Field, q: float, r: float, time_grid) -> SmoothingProbe:
    """Measured constant in ``||S(t)f||_r <= C t^{-(n/2)(1/q - 1/r)} ||f||_q``."""
    if not (1 <= q <= r):
        raise ValueError(f"need 1 <= q <= r, got q={q}, r={r}")
    times = _check_time_grid(time_grid)
    n = plan.domain.n
    gain = n / 2 * (1 / q - (0.0 if math.isinf(r) else 1 / r))
    norm_q = lq_norm(f, q)
    evolved = plan.evolve(f, times)
    ratios = np.zeros(len(times))
    if norm_q == 0:
        return SmoothingProbe(times, ratios)
    for j, t in enumerate(times):
        if t == 0:
            ratios[j] = lq_norm(f, r) / norm_q if gain == 0 else 0.0
            continue
        st = Field(plan.domain, np.maximum(evolved[j], 0.0))
        ratios[j] = lq_norm(st, r) * t ** gain / norm_q
    return SmoothingProbe(times, ratios)


@dataclass(frozen=True)
class JensenResult:
    holds: bool
    min_gap: float
    worst_index: tuple[int, ...]


def jensen_check(plan: SemigroupPlan, f: Field, r: float, t: float, tol: float = 1e-10) -> JensenResult:
    """Minimum over the grid of ``S(t)(f^r) - (S(t) f)^r``."""
    if r < 1:
        raise ValueError(f"Jensen inequality needs r >= 1, got {r}")
    if t < 0:
        raise ValueError(f"negative time {t}")
    lhs = plan.apply(f, t).values ** r
    rhs = plan.apply(f.power(r), t).values
    gap = rhs - lhs
    idx = np.unravel_index(int(np.argmin(gap)), gap.shape)
    min_gap = float(gap[idx])
    return JensenResult(min_gap >= -tol, min_gap, tuple(int(i) for i in idx))
