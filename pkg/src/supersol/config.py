"""Flat ``key = value`` experiment configs.

Blank lines and ``#`` comments are ignored. Keys are dotted (``domain.kind``)
and must appear in :data:`SCHEMA`; anything else is rejected. Numbers accept
the token ``pi`` in the forms ``pi``, ``k*pi``, ``pi/m`` and ``k*pi/m``, as
well as ``inf``. Lists are comma separated. See ``docs/config_schema.md``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

from .field_core import (
    Constant,
    Domain,
    Eigenfunction,
    Field,
    Gaussian,
    Nonlinearity,
    PowerSingularity,
    make_field,
)


class ConfigError(ValueError):
    """Malformed, unknown or out-of-range config entry."""


_PI = re.compile(r"^(?:([0-9.eE+-]+)\s*\*\s*)?pi(?:\s*/\s*([0-9.eE+-]+))?$")


def parse_number(text: str) -> float:
    text = text.strip().lower()
    m = _PI.match(text)
    if m:
        num = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(parse_number(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(_int(x) for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _choice(*options):
    def conv(text):
        t = text.strip().lower()
        if t not in options:
            raise ConfigError(f"{text!r} is not one of {', '.join(options)}")
        return t
    return conv


def _table(text: str) -> tuple[tuple[float, float], ...]:
    pts = []
    for item in text.split(","):
        if not item.strip():
            continue
        if ":" not in item:
            raise ConfigError(f"table entry {item!r} is not s:f(s)")
        s, v = item.split(":", 1)
        pts.append((parse_number(s), parse_number(v)))
    return tuple(pts)


# key -> (attribute, converter, default)
SCHEMA = {
    "domain.kind": ("domain_kind", _choice("dirichlet", "periodic", "whole_space"), "dirichlet"),
    "domain.n": ("n", _int, 1),
    "domain.sides": ("sides", _floats, None),
    "domain.radius": ("radius", parse_number, 10.0),
    "domain.grid": ("grid", _int, 512),
    "domain.modes": ("modes", _int, 128),
    "domain.tail_tol": ("tail_tol", parse_number, 1e-8),
    "profile.kind": ("profile_kind", _choice("eigenfunction", "gaussian", "power", "constant"),
                     "eigenfunction"),
    "profile.amplitude": ("amplitude", parse_number, 1.0),
    "profile.modes": ("profile_modes", _ints, (1,)),
    "profile.center": ("center", _floats, None),
    "profile.width": ("width", parse_number, 1.0),
    "profile.exponent": ("exponent", parse_number, 0.5),
    "nonlinearity.kind": ("f_kind", _choice("power", "table", "zero"), "power"),
    "nonlinearity.p": ("p", parse_number, 2.0),
    "nonlinearity.table": ("table", _table, ()),
    "q": ("q", parse_number, 1.0),
    "time.T": ("T", parse_number, 1.0),
    "time.J": ("J", _int, 64),
    "time.gamma": ("gamma", parse_number, 2.0),
    "certify.A": ("A", parse_number, None),
    "probe.times": ("probe_times", _floats, (0.1, 0.5, 1.0, 2.0)),
    "probe.r": ("probe_r", _floats, (1.5, 2.0, 3.0)),
    "iterate.tol": ("iterate_tol", parse_number, 1e-6),
    "iterate.max_iter": ("max_iter", _int, 100),
    "oracle.dt": ("dt", parse_number, 1e-4),
    "oracle.T": ("oracle_T", parse_number, None),
    "compare.tol": ("compare_tol", parse_number, 1e-4),
    "scan.amplitudes": ("scan_amplitudes", _floats, ()),
    "scan.p": ("scan_p", _floats, ()),
    "scan.q": ("scan_q", _floats, ()),
    "scan.oracle": ("scan_oracle", _bool, False),
    "output": ("output", str.strip, "out"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    domain_kind: str = "dirichlet"
    n: int = 1
    sides: tuple | None = None
    radius: float = 10.0
    grid: int = 512
    modes: int = 128
    tail_tol: float = 1e-8
    profile_kind: str = "eigenfunction"
    amplitude: float = 1.0
    profile_modes: tuple = (1,)
    center: tuple | None = None
    width: float = 1.0
    exponent: float = 0.5
    f_kind: str = "power"
    p: float = 2.0
    table: tuple = ()
    q: float = 1.0
    T: float = 1.0
    J: int = 64
    gamma: float = 2.0
    A: float | None = None
    probe_times: tuple = (0.1, 0.5, 1.0, 2.0)
    probe_r: tuple = (1.5, 2.0, 3.0)
    iterate_tol: float = 1e-6
    max_iter: int = 100
    dt: float = 1e-4
    oracle_T: float | None = None
    compare_tol: float = 1e-4
    scan_amplitudes: tuple = ()
    scan_p: tuple = ()
    scan_q: tuple = ()
    scan_oracle: bool = False
    output: str = "out"

    def __post_init__(self):
        checks = [
            (self.n in (1, 2, 3), "domain.n must be 1, 2 or 3"),
            (self.grid >= 16, "domain.grid must be >= 16"),
            (8 <= self.modes and 2 * self.modes <= self.grid, "need 8 <= domain.modes <= domain.grid / 2"),
            (self.radius > 0, "domain.radius must be positive"),
            (self.tail_tol > 0, "domain.tail_tol must be positive"),
            (self.amplitude >= 0, "profile.amplitude must be >= 0"),
            (self.width > 0, "profile.width must be positive"),
            (self.q >= 1, "q must be >= 1"),
            (self.T > 0, "time.T must be positive"),
            (self.J >= 1, "time.J must be >= 1"),
            (self.gamma >= 1, "time.gamma must be >= 1"),
            (self.A is None or self.A > 1, "certify.A must be > 1"),
            (all(t > 0 for t in self.probe_times), "probe.times must be positive"),
            (all(r >= 1 for r in self.probe_r), "probe.r must be >= 1"),
            (self.iterate_tol > 0, "iterate.tol must be positive"),
            (self.max_iter >= 1, "iterate.max_iter must be >= 1"),
            (self.dt > 0, "oracle.dt must be positive"),
            (self.oracle_T is None or 0 < self.oracle_T < math.inf, "oracle.T must be positive and finite"),
            (self.compare_tol > 0, "compare.tol must be positive"),
            (all(a >= 0 for a in self.scan_amplitudes), "scan.amplitudes must be >= 0"),
            (all(p > 1 for p in self.scan_p), "scan.p must be > 1"),
            (all(q >= 1 for q in self.scan_q), "scan.q must be >= 1"),
        ]
        if self.f_kind == "power":
            checks.append((self.p > 1, "nonlinearity.p must be > 1"))
        if self.sides is not None:
            checks.append((len(self.sides) in (1, self.n) and all(s > 0 for s in self.sides),
                           "domain.sides needs 1 or n positive lengths"))
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            attr, conv, _ = SCHEMA[key]
            if attr in kwargs:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                kwargs[attr] = conv(value)
            except ConfigError as exc:
                raise ConfigError(f"line {lineno} ({key}): {exc}") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text())

    def domain(self) -> Domain:
        if self.domain_kind == "whole_space":
            return Domain.whole_space(self.radius, self.n, self.grid, self.modes, self.tail_tol)
        if self.domain_kind == "dirichlet":
            sides = self.sides or (math.pi,)
            return Domain.dirichlet(_per_axis(sides, self.n), self.n, self.grid, self.modes)
        sides = self.sides or (2 * math.pi,)
        return Domain.periodic(_per_axis(sides, self.n), self.n, self.grid, self.modes)

    def profile(self, amplitude: float | None = None):
        amp = self.amplitude if amplitude is None else amplitude
        if self.profile_kind == "eigenfunction":
            return Eigenfunction(self.profile_modes, amp)
        if self.profile_kind == "constant":
            return Constant(amp)
        center = self._center()
        if self.profile_kind == "gaussian":
            return Gaussian(center, self.width, amp)
        return PowerSingularity(center, self.exponent, amp)

    def field(self, domain: Domain, amplitude: float | None = None) -> Field:
        return make_field(domain, self.profile(amplitude))

    def nonlinearity(self, p: float | None = None) -> Nonlinearity:
        if self.f_kind == "zero":
            return Nonlinearity.zero()
        if self.f_kind == "table":
            try:
                return Nonlinearity.monotone_table(self.table)
            except ValueError as exc:
                raise ConfigError(f"nonlinearity.table: {exc}") from None
        return Nonlinearity.power_law(self.p if p is None else p)

    def _center(self) -> tuple:
        if self.center is not None:
            return _per_axis(self.center, self.n)
        if self.domain_kind == "whole_space":
            return (0.0,) * self.n
        sides = _per_axis(self.sides or ((math.pi,) if self.domain_kind == "dirichlet" else (2 * math.pi,)), self.n)
        return tuple(s / 2 for s in sides)


def _per_axis(values, n: int) -> tuple:
    values = tuple(values)
    return values * n if len(values) == 1 else values
