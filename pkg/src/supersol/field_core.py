"""Domains, grid fields, nonlinearities and norms.

Grid conventions (``N = grid_points`` intervals per axis):

* ``dirichlet_box`` on ``[0, L]``: ``N + 1`` nodes including both walls.
* ``periodic_box`` on ``[0, L)``: ``N`` nodes, the right end identified with 0.
* ``whole_space_truncated`` on ``[-R, R]``: ``N + 1`` nodes, fields are
  treated as zero outside the box and must be negligible on its faces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import fft as sfft
from scipy import integrate

NEGATIVE_ROUNDOFF = 1e-14
ROUND_TRIP_TOL = 1e-10


class ProfileError(ValueError):
    """Rejected initial profile; ``code`` says why."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


class DomainKind(str, enum.Enum):
    DIRICHLET_BOX = "dirichlet_box"
    PERIODIC_BOX = "periodic_box"
    WHOLE_SPACE_TRUNCATED = "whole_space_truncated"


@dataclass(frozen=True)
class Domain:
    """Box geometry plus boundary condition and resolution.

    For ``whole_space_truncated`` the ``side_lengths`` are the full widths
    ``2R`` of the truncation box centred at the origin.
    """

    kind: DomainKind
    n: int
    side_lengths: tuple[float, ...]
    grid_points: int = 512
    mode_cutoff: int = 128
    tail_tolerance: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        sides = self.side_lengths
        if np.isscalar(sides):
            sides = (float(sides),) * self.n
        sides = tuple(float(s) for s in sides)
        if len(sides) != self.n:
            raise ValueError(f"need {self.n} side lengths, got {len(sides)}")
        if any(not (s > 0 and math.isfinite(s)) for s in sides):
            raise ValueError(f"side lengths must be positive and finite: {sides}")
        object.__setattr__(self, "side_lengths", sides)
        if self.grid_points < 8:
            raise ValueError("grid_points must be >= 8")
        if self.mode_cutoff < 8:
            raise ValueError("mode_cutoff must be >= 8")
        if self.grid_points < 2 * self.mode_cutoff:
            raise ValueError("grid_points must be >= 2 * mode_cutoff")
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")

    @classmethod
    def dirichlet(cls, sides=math.pi, n=1, grid_points=512, mode_cutoff=128) -> Domain:
        return cls(DomainKind.DIRICHLET_BOX, n, sides, grid_points, mode_cutoff)

    @classmethod
    def periodic(cls, sides=2 * math.pi, n=1, grid_points=512, mode_cutoff=128) -> Domain:
        return cls(DomainKind.PERIODIC_BOX, n, sides, grid_points, mode_cutoff)

    @classmethod
    def whole_space(cls, radius=10.0, n=1, grid_points=512, mode_cutoff=128,
                    tail_tolerance=1e-8) -> Domain:
        if np.isscalar(radius):
            radius = (float(radius),) * n
        return cls(DomainKind.WHOLE_SPACE_TRUNCATED, n, tuple(2 * r for r in radius),
                   grid_points, mode_cutoff, tail_tolerance)

    @property
    def truncation_radius(self) -> tuple[float, ...]:
        if self.kind is not DomainKind.WHOLE_SPACE_TRUNCATED:
            raise AttributeError("only truncated whole-space domains have a radius")
        return tuple(s / 2 for s in self.side_lengths)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(s / self.grid_points for s in self.side_lengths)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        N = self.grid_points
        if self.kind is DomainKind.DIRICHLET_BOX:
            return tuple(np.linspace(0.0, L, N + 1) for L in self.side_lengths)
        if self.kind is DomainKind.PERIODIC_BOX:
            return tuple(np.arange(N) * (L / N) for L in self.side_lengths)
        return tuple(np.linspace(-L / 2, L / 2, N + 1) for L in self.side_lengths)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def node_coordinates(self, index) -> tuple[float, ...]:
        index = np.atleast_1d(index)
        return tuple(float(ax[i]) for ax, i in zip(self.axes, index))

    def quadrature_weights(self) -> np.ndarray:
        """Composite trapezoid weights on the node grid."""
        per_axis = []
        for h, ax in zip(self.spacing, self.axes):
            w = np.full(len(ax), h)
            if self.kind is not DomainKind.PERIODIC_BOX:
                w[0] = w[-1] = h / 2
            per_axis.append(w)
        weights = per_axis[0]
        for w in per_axis[1:]:
            weights = np.multiply.outer(weights, w)
        return weights

    def boundary_mask(self) -> np.ndarray:
        """Nodes on the faces of the box (empty for periodic boxes)."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.kind is DomainKind.PERIODIC_BOX:
            return mask
        for axis in range(self.n):
            idx = [slice(None)] * self.n
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        return mask

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers of the full discrete spectral basis per axis."""
        N = self.grid_points
        if self.kind is DomainKind.DIRICHLET_BOX:
            return tuple(np.arange(1, N) * math.pi / L for L in self.side_lengths)
        if self.kind is DomainKind.PERIODIC_BOX:
            return tuple(2 * math.pi * np.fft.fftfreq(N, d=1.0 / N) / L for L in self.side_lengths)
        raise ValueError("truncated whole space has no spectral basis")

    def volume(self) -> float:
        return float(np.prod(self.side_lengths))


# -- spectral transforms -----------------------------------------------------

def _space_axes(domain: Domain) -> tuple[int, ...]:
    return tuple(range(-domain.n, 0))


def grid_to_modes(domain: Domain, values: np.ndarray) -> np.ndarray:
    """Full discrete spectral coefficients of grid values.

    Leading axes are treated as a batch. Dirichlet: sine amplitudes ``b_k``
    with ``v(x) = sum b_k sin(k pi x / L)``; periodic: complex amplitudes
    ``c_k`` with ``v(x) = sum c_k exp(2 pi i k x / L)``, numpy fft ordering.
    """
    axes = _space_axes(domain)
    N = domain.grid_points
    if domain.kind is DomainKind.DIRICHLET_BOX:
        interior = values[(Ellipsis,) + (slice(1, -1),) * domain.n]
        return sfft.dstn(interior, type=1, axes=axes) / N ** domain.n
    if domain.kind is DomainKind.PERIODIC_BOX:
        return sfft.fftn(values, axes=axes) / N ** domain.n
    raise ValueError("truncated whole space has no spectral basis")


def modes_to_grid(domain: Domain, coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`grid_to_modes`; Dirichlet walls are set to zero."""
    axes = _space_axes(domain)
    N = domain.grid_points
    if domain.kind is DomainKind.DIRICHLET_BOX:
        interior = sfft.idstn(coeffs * N ** domain.n, type=1, axes=axes)
        out = np.zeros(coeffs.shape[: coeffs.ndim - domain.n] + domain.shape)
        out[(Ellipsis,) + (slice(1, -1),) * domain.n] = interior
        return out
    if domain.kind is DomainKind.PERIODIC_BOX:
        return sfft.ifftn(coeffs * N ** domain.n, axes=axes).real
    raise ValueError("truncated whole space has no spectral basis")


def _retained_index(domain: Domain) -> tuple:
    M, N = domain.mode_cutoff, domain.grid_points
    if domain.kind is DomainKind.DIRICHLET_BOX:
        one = np.arange(M)
    else:
        one = np.fft.fftfreq(M, d=1.0 / M).astype(int) % N
    return np.ix_(*([one] * domain.n))


def to_spectral(domain: Domain, values: np.ndarray) -> np.ndarray:
    """Truncated coefficient array, ``mode_cutoff`` entries per axis.

    Dirichlet keeps sine modes ``k = 1..M``; periodic keeps wavenumbers
    ``-M/2 .. M/2 - 1`` in fft order.
    """
    return grid_to_modes(domain, values)[_retained_index(domain)]


def from_spectral(domain: Domain, coeffs: np.ndarray) -> np.ndarray:
    M, N = domain.mode_cutoff, domain.grid_points
    if coeffs.shape != (M,) * domain.n:
        raise ValueError(f"expected coefficient shape {(M,) * domain.n}, got {coeffs.shape}")
    size = N - 1 if domain.kind is DomainKind.DIRICHLET_BOX else N
    dtype = float if domain.kind is DomainKind.DIRICHLET_BOX else complex
    full = np.zeros((size,) * domain.n, dtype=dtype)
    full[_retained_index(domain)] = coeffs
    return modes_to_grid(domain, full)


# -- singular profiles ---------------------------------------------------------

@dataclass(frozen=True)
class Singularity:
    """Analytic description of ``amplitude * |x - center|^(-exponent)``."""

    center: tuple[float, ...]
    exponent: float
    amplitude: float

    def lq_range(self, n: int) -> float:
        """Supremum of the q for which the profile is in L^q (exclusive)."""
        return math.inf if self.exponent == 0 else n / self.exponent

    def integrable(self, q: float, n: int) -> bool:
        return q * self.exponent < n

    def power(self, r: float) -> Singularity:
        return Singularity(self.center, self.exponent * r, self.amplitude ** r)

    def scaled(self, c: float) -> Singularity:
        return Singularity(self.center, self.exponent, self.amplitude * c)

    def integral_of_power(self, domain: Domain, q: float) -> float | None:
        """Exact ``int |phi|^q`` over the box, or None if unsupported."""
        b = self.exponent * q
        if b >= domain.n:
            return math.inf
        lows, highs = _box_bounds(domain)
        c = self.amplitude ** q
        if domain.n == 1:
            x0 = self.center[0]
            left, right = x0 - lows[0], highs[0] - x0
            return c * (left ** (1 - b) + right ** (1 - b)) / (1 - b)
        if domain.n == 2:
            total = 0.0
            x0, y0 = self.center
            for X in (x0 - lows[0], highs[0] - x0):
                for Y in (y0 - lows[1], highs[1] - y0):
                    total += _corner_rectangle_integral(X, Y, b)
            return c * total
        return None


def _box_bounds(domain: Domain) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if domain.kind is DomainKind.WHOLE_SPACE_TRUNCATED:
        return tuple(-s / 2 for s in domain.side_lengths), tuple(s / 2 for s in domain.side_lengths)
    return (0.0,) * domain.n, domain.side_lengths


def _corner_rectangle_integral(X: float, Y: float, b: float) -> float:
    # int over [0,X]x[0,Y] of r^-b in polar coordinates about the corner
    if X <= 0 or Y <= 0:
        return 0.0
    split = math.atan2(Y, X)
    lower = integrate.quad(lambda th: (X / math.cos(th)) ** (2 - b), 0.0, split)[0]
    upper = integrate.quad(lambda th: (Y / math.sin(th)) ** (2 - b), split, math.pi / 2)[0]
    return (lower + upper) / (2 - b)


# -- fields ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Field:
    """Nonnegative grid function on a domain.

    ``singularity`` is set for capped power-singular data so that norms and
    spectral coefficients can be computed from the exact profile.
    """

    domain: Domain
    values: np.ndarray
    singularity: Singularity | None = None
    spectral: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.domain.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
        if v.size and v.min() < -NEGATIVE_ROUNDOFF * scale:
            raise ProfileError("negative_values", f"field has negative value {v.min():.3e}")
        np.maximum(v, 0.0, out=v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.spectral is not None:
            c = np.array(self.spectral)
            c.setflags(write=False)
            object.__setattr__(self, "spectral", c)
            synth = from_spectral(self.domain, c)
            err = np.max(np.abs(np.maximum(synth, 0.0) - v))
            if err > ROUND_TRIP_TOL * scale:
                raise ValueError(f"spectral coefficients disagree with values (max error {err:.2e})")

    @classmethod
    def zeros(cls, domain: Domain) -> Field:
        return cls(domain, np.zeros(domain.shape))

    def with_values(self, values: np.ndarray) -> Field:
        return Field(self.domain, values)

    def scaled(self, c: float) -> Field:
        if c < 0:
            raise ValueError("scale factor must be nonnegative")
        sing = self.singularity.scaled(c) if self.singularity else None
        coeffs = None if self.spectral is None else self.spectral * c
        return Field(self.domain, self.values * c, sing, coeffs)

    def power(self, r: float) -> Field:
        """Pointwise ``phi ** r``; singular metadata follows along."""
        if r <= 0:
            raise ValueError("power must be positive")
        sing = self.singularity.power(r) if self.singularity else None
        if sing is not None and not sing.integrable(1.0, self.domain.n):
            raise ProfileError("not_integrable",
                               f"phi^{r} is not integrable (exponent {sing.exponent:g} >= n)")
        return Field(self.domain, self.values ** r, sing)

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def is_zero(self) -> bool:
        return self.singularity is None and not np.any(self.values)


# -- profiles ------------------------------------------------------------------

def _as_point(value, n: int) -> tuple[float, ...]:
    if np.isscalar(value):
        return (float(value),) * n
    point = tuple(float(v) for v in value)
    if len(point) != n:
        raise ValueError(f"point needs {n} coordinates, got {len(point)}")
    return point


@dataclass(frozen=True)
class Eigenfunction:
    modes: tuple[int, ...] = (1,)
    amplitude: float = 1.0


@dataclass(frozen=True)
class Gaussian:
    center: Union[float, tuple] = 0.0
    width: float = 1.0
    amplitude: float = 1.0


@dataclass(frozen=True)
class PowerSingularity:
    center: Union[float, tuple]
    exponent: float
    amplitude: float = 1.0


@dataclass(frozen=True)
class Constant:
    amplitude: float = 0.0


@dataclass(frozen=True)
class Table:
    values: Sequence = field(default_factory=list)


Profile = Union[Eigenfunction, Gaussian, PowerSingularity, Constant, Table]


def make_field(domain: Domain, profile: Profile) -> Field:
    """Sample an initial profile on the grid of ``domain``."""
    amplitude = getattr(profile, "amplitude", 0.0)
    if amplitude < 0:
        raise ProfileError("negative_amplitude", f"amplitude {amplitude} < 0")
    X = domain.coordinates()

    if isinstance(profile, Eigenfunction):
        return _eigenfunction_field(domain, profile, X)

    if isinstance(profile, Gaussian):
        if profile.width <= 0:
            raise ProfileError("bad_width", "gaussian width must be positive")
        c = _as_point(profile.center, domain.n)
        r2 = sum((x - ci) ** 2 for x, ci in zip(X, c))
        fld = Field(domain, amplitude * np.exp(-r2 / profile.width ** 2))
        _check_tail(fld)
        return fld

    if isinstance(profile, PowerSingularity):
        return _singular_field(domain, profile, X)

    if isinstance(profile, Constant):
        fld = Field(domain, np.full(domain.shape, float(amplitude)))
        if amplitude > 0:
            _check_tail(fld)
        return fld

    if isinstance(profile, Table):
        values = np.asarray(profile.values, dtype=float).reshape(domain.shape)
        return Field(domain, values)

    raise TypeError(f"unknown profile {profile!r}")


def _eigenfunction_field(domain: Domain, profile: Eigenfunction, X) -> Field:
    modes = tuple(int(k) for k in np.atleast_1d(profile.modes))
    if len(modes) == 1 and domain.n > 1:
        modes = modes * domain.n
    if len(modes) != domain.n:
        raise ProfileError("bad_modes", f"need {domain.n} mode indices")
    a = profile.amplitude
    if domain.kind is DomainKind.DIRICHLET_BOX:
        if any(k < 1 for k in modes):
            raise ProfileError("bad_modes", "Dirichlet modes start at 1")
        values = a * np.prod([np.sin(k * math.pi * x / L)
                              for k, x, L in zip(modes, X, domain.side_lengths)], axis=0)
        if any(k > 1 for k in modes):
            raise ProfileError("negative_values", f"sine mode {modes} changes sign")
        spectral = None
        if max(modes) <= domain.mode_cutoff:
            spectral = np.zeros((domain.mode_cutoff,) * domain.n)
            spectral[tuple(k - 1 for k in modes)] = a
        return Field(domain, values, spectral=spectral)
    if domain.kind is DomainKind.PERIODIC_BOX:
        if any(k != 0 for k in modes):
            raise ProfileError("negative_values", f"periodic mode {modes} changes sign")
        spectral = np.zeros((domain.mode_cutoff,) * domain.n, dtype=complex)
        spectral[(0,) * domain.n] = a
        return Field(domain, np.full(domain.shape, float(a)), spectral=spectral)
    raise ProfileError("unsupported_domain", "truncated whole space has no eigenfunctions")


def _singular_field(domain: Domain, profile: PowerSingularity, X) -> Field:
    a = float(profile.exponent)
    if a <= 0:
        raise ProfileError("bad_exponent", "singularity exponent must be positive")
    if a >= domain.n:
        raise ProfileError("not_integrable",
                           f"|x|^-{a:g} is not in L^1 in dimension {domain.n} (need exponent < n)")
    c = _as_point(profile.center, domain.n)
    lows, highs = _box_bounds(domain)
    if any(not (lo <= ci <= hi) for ci, lo, hi in zip(c, lows, highs)):
        raise ProfileError("bad_center", f"center {c} lies outside the domain")
    r = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(X, c)))
    hmin = min(domain.spacing)
    with np.errstate(divide="ignore"):
        values = profile.amplitude * np.where(r > 1e-12 * hmin, r, 0.0) ** (-a)
    hit = ~np.isfinite(values)
    if np.any(hit):
        # cap the node on the singularity by its largest neighbour
        idx = np.argwhere(hit)[0]
        window = tuple(slice(max(i - 1, 0), i + 2) for i in idx)
        neigh = values[window]
        values[tuple(idx)] = np.max(neigh[np.isfinite(neigh)])
    return Field(domain, values, Singularity(c, a, float(profile.amplitude)))


def _check_tail(fld: Field) -> None:
    domain = fld.domain
    if domain.kind is not DomainKind.WHOLE_SPACE_TRUNCATED:
        return
    edge = float(fld.values[domain.boundary_mask()].max())
    if edge > domain.tail_tolerance * max(fld.sup, 1e-300):
        raise ProfileError("tail_tolerance",
                           f"field is {edge:.2e} on the truncation boundary; enlarge the radius")


# -- norms and order ----------------------------------------------------------

def lq_norm(f: Field, q: float) -> float:
    """L^q norm by composite trapezoid; ``q = inf`` gives the grid maximum.

    For singular profiles the norm comes from the exact profile, so it is
    ``inf`` whenever the profile is not in L^q.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    sing = f.singularity
    if math.isinf(q):
        return math.inf if sing is not None else f.sup
    if sing is not None:
        exact = sing.integral_of_power(f.domain, q)
        if exact is not None:
            return exact ** (1.0 / q)
    top = f.sup
    if top == 0.0:
        return 0.0
    w = f.domain.quadrature_weights()
    return top * float(np.sum(w * (f.values / top) ** q)) ** (1.0 / q)


@dataclass(frozen=True)
class Comparison:
    """Result of a nodewise ``f <= g + tol`` test."""

    dominated: bool
    gap: float
    worst_index: tuple[int, ...]
    worst_point: tuple[float, ...]


def pointwise_compare(f: Field, g: Field, tol: float = 0.0) -> Comparison:
    if f.domain != g.domain:
        raise ValueError("fields live on different grids")
    return compare_arrays(f.domain, f.values, g.values, tol)


def compare_arrays(domain: Domain, a: np.ndarray, b: np.ndarray, tol: float = 0.0) -> Comparison:
    """Nodewise ``a <= b + tol`` for raw arrays over the grid of ``domain``."""
    if a.shape != b.shape:
        raise ValueError(f"mismatched grids {a.shape} vs {b.shape}")
    diff = a - b
    flat = int(np.argmax(diff))
    idx = np.unravel_index(flat, diff.shape)
    gap = float(diff[idx])
    space_idx = tuple(int(i) for i in idx[-domain.n:])
    return Comparison(gap <= tol, gap, tuple(int(i) for i in idx), domain.node_coordinates(space_idx))


# -- nonlinearities ---------------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    """Continuous nondecreasing source ``f: [0, inf) -> [0, inf)``.

    ``monotone_table`` interpolates linearly between breakpoints ``(s, f(s))``
    and is held constant past the last one.
    """

    kind: str
    p: float | None = None
    breakpoints: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind == "power_law":
            if self.p is None or not self.p > 1:
                raise ValueError(f"power law needs p > 1, got {self.p}")
        elif self.kind == "monotone_table":
            pts = tuple((float(s), float(v)) for s, v in self.breakpoints or ())
            if len(pts) < 2:
                raise ValueError("table needs at least two breakpoints")
            s = np.array([pt[0] for pt in pts])
            v = np.array([pt[1] for pt in pts])
            if s[0] != 0.0 or np.any(np.diff(s) <= 0):
                raise ValueError("breakpoints must start at s=0 and increase strictly")
            if np.any(v < 0) or np.any(np.diff(v) < 0):
                raise ValueError("table values must be nonnegative and nondecreasing")
            object.__setattr__(self, "breakpoints", pts)
        else:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")

    @classmethod
    def power_law(cls, p: float) -> Nonlinearity:
        return cls("power_law", p=float(p))

    @classmethod
    def monotone_table(cls, points) -> Nonlinearity:
        return cls("monotone_table", breakpoints=tuple(points))

    @classmethod
    def zero(cls) -> Nonlinearity:
        return cls.monotone_table([(0.0, 0.0), (1.0, 0.0)])

    @property
    def is_zero(self) -> bool:
        return self.kind == "monotone_table" and all(v == 0.0 for _, v in self.breakpoints)

    @property
    def value_at_zero(self) -> float:
        return 0.0 if self.kind == "power_law" else self.breakpoints[0][1]

    def __call__(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        if self.kind == "power_law":
            return np.power(s, self.p)
        xs, vs = zip(*self.breakpoints)
        return np.interp(s, xs, vs)

    def escape_time(self, s: float) -> float:
        """``int_s^inf dr / f(r)``: time for ``y' = f(y)`` to run off from ``y = s``."""
        if self.kind == "power_law" and s > 0:
            return s ** (1 - self.p) / (self.p - 1)
        return math.inf

    def describe(self) -> str:
        if self.kind == "power_law":
            return f"s^{self.p:g}"
        return f"table[{len(self.breakpoints)}]"
