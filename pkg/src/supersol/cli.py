"""Batch front end: ``supersol <command> --config <path> [--out <dir>] [--force]``.

Every command writes its tables plus a ``summary.csv`` into the output
directory. Exit codes: 0 success, 2 invalid-certificate verdict, 3 config
error, 4 numerical failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import tables
from .certificate import Certificate
from .certificates import (
    GaugeError,
    RegularityGauge,
    build_prop32_supersolution,
    condp_functional,
    cp_constant,
    critical_exponent,
    log_linear_grid,
    necessary_condition_monitor,
    optimal_A,
    subcritical_sufficient,
    supercritical_certificate,
)
from .config import ConfigError, ExperimentConfig
from .duhamel import (
    MonotonicityError,
    NotSupersolutionError,
    check_subsolution_chain,
    graded_time_grid,
    monotone_solve,
)
from .field_core import DomainKind, Field, Nonlinearity
from .oracle import sandwich_validate, solve_reference
from .semigroup import SemigroupPlan, jensen_check, make_plan, smoothing_probe, sup_norm_trace

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
EXISTENCE_IDS = {"condp", "global_condp", "prop32", "supercritical_smth", "subcritical_suff"}
SUMMARY_COLUMNS = ("item", "value", "ok")
SANDWICH_TOL = 1e-6


class NumericalFailure(RuntimeError):
    pass


@dataclass
class Setup:
    cfg: ExperimentConfig
    plan: SemigroupPlan
    phi: Field
    f: Nonlinearity
    out: Path

    @property
    def domain(self):
        return self.plan.domain


def _setup(config: str, out: str | None) -> Setup:
    try:
        cfg = ExperimentConfig.load(config)
        domain = cfg.domain()
        phi = cfg.field(domain)
        f = cfg.nonlinearity()
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return Setup(cfg, make_plan(domain), phi, f, Path(out or cfg.output))


def _run(command, config, out, force=False):
    try:
        setup = _setup(config, out)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        raise SystemExit(EXIT_CONFIG)
    try:
        code, summary, message = command(setup, force)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        raise SystemExit(EXIT_CONFIG)
    except (NumericalFailure, MonotonicityError, NotSupersolutionError, FloatingPointError,
            ValueError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        raise SystemExit(EXIT_NUMERIC)
    if summary is not None:
        header, rows = summary
        tables.write_csv(setup.out / "summary.csv", header, rows)
    if message:
        click.echo(message, err=code != EXIT_OK)
    raise SystemExit(code)


def _command(fn):
    @main.command(name=fn.__name__.replace("cmd_", "").replace("_", "-"), help=fn.__doc__)
    @click.option("--config", "config", required=True, type=click.Path(dir_okay=False))
    @click.option("--out", "out", default=None, help="Output directory (default: the config's output key).")
    @click.option("--force", is_flag=True, help="Run even without a valid certificate.")
    def wrapper(config, out, force):
        _run(fn, config, out, force)
    return fn


@click.group()
def main():
    """Supersolution certificates for u_t = Lap u + f(u)."""


def _finite_T(cfg: ExperimentConfig) -> float:
    if math.isinf(cfg.T):
        raise ConfigError("this command needs a finite time.T")
    return cfg.T


def _A(cfg: ExperimentConfig, f: Nonlinearity) -> float:
    if cfg.A is not None:
        return cfg.A
    return optimal_A(f.p) if f.kind == "power_law" else 2.0


def _certificate_span(plan: SemigroupPlan, T: float) -> float:
    if math.isfinite(T):
        return T
    gap = plan.spectral_gap
    return 30.0 / gap if gap > 0 else 30.0


# -- semigroup-probe ----------------------------------------------------------------

def cmd_semigroup_probe(s: Setup, force: bool):
    """Sup-norm trace, smoothing constants and Jensen gaps of the heat semigroup."""
    cfg = s.cfg
    T = _finite_T(cfg)
    times = np.unique(np.concatenate([np.linspace(0.0, T, cfg.J + 1), cfg.probe_times]))
    trace = sup_norm_trace(s.plan, s.phi, times)
    tables.write_trace(s.out / "trace.csv", trace, "sup_norm")

    smooth_rows, summary = [], [("sup_norm_at_T", float(trace[np.searchsorted(times, T), 1]), 1)]
    pos = times[times > 0]
    for r in cfg.probe_r:
        if r < cfg.q:
            continue
        probe = smoothing_probe(s.plan, s.phi, cfg.q, r, pos)
        smooth_rows += [(cfg.q, r, t, v) for t, v in probe.rows()]
        summary.append((f"max_smoothing_ratio_r{r:g}", probe.max_ratio, 1))
    tables.write_csv(s.out / "smoothing.csv", ["q", "r", "t", "ratio"], smooth_rows)

    jensen_rows, worst = [], math.inf
    for r in cfg.probe_r:
        for t in cfg.probe_times:
            res = jensen_check(s.plan, s.phi, r, t)
            jensen_rows.append((r, t, res.min_gap, res.holds))
            worst = min(worst, res.min_gap)
    tables.write_csv(s.out / "jensen.csv", ["r", "t", "min_gap", "holds"], jensen_rows)
    holds = all(row[3] for row in jensen_rows)
    summary.append(("jensen_min_gap", worst if jensen_rows else math.nan, holds))
    code = EXIT_OK if holds else EXIT_NUMERIC
    return code, (SUMMARY_COLUMNS, summary), "" if holds else "Jensen inequality violated"


# -- certify ----------------------------------------------------------------------

def global_condp(cert: Certificate) -> Certificate:
    """The condp result read on ``[0, inf)``."""
    params = dict(cert.parameters)
    if cert.is_global:
        return Certificate("global_condp", True, math.inf, cert.margin, params)
    bound = params.get("P_inf_bound")
    if bound is None:
        return Certificate("global_condp", False, 0.0, -math.inf, params,
                           diagnostic="no analytic tail bound on this domain")
    return Certificate("global_condp", False, 0.0, params["C_p"] - bound, params)


def evaluate_certificates(plan: SemigroupPlan, phi: Field, f: Nonlinearity, q: float, T: float,
                          J: int = 64, gamma: float = 2.0, A: float | None = None):
    """Every applicable certificate for ``(phi, f, q)`` on ``[0, T]``.

    Returns ``(certificates, prop32 supersolution or None, condp result or None)``.
    """
    certs, w, cond = [], None, None
    A = A if A is not None else (optimal_A(f.p) if f.kind == "power_law" else 2.0)
    if f.kind == "power_law":
        p = f.p
        cond = condp_functional(plan, phi, p, q, log_linear_grid(_certificate_span(plan, T)))
        certs += [cond.certificate, global_condp(cond.certificate)]
    try:
        w, c32 = build_prop32_supersolution(plan, phi, f, RegularityGauge.power(phi, q), A, T,
                                            J=J, gamma=gamma)
    except GaugeError as exc:
        c32 = Certificate("prop32", False, 0.0, -math.inf, {"q": q, "A": A}, diagnostic=str(exc))
    certs.append(c32)
    if f.kind == "power_law":
        n = plan.domain.n
        regime = critical_exponent(n, p).classify(q)
        if regime.regime == "supercritical":
            certs.append(supercritical_certificate(phi, p, q, A))
        grid = log_linear_grid(_certificate_span(plan, T))
        if regime.regime == "subcritical" and q > 1:
            certs.append(subcritical_sufficient(plan, phi, p, q, grid))
        certs.append(necessary_condition_monitor(plan, phi, p, grid).certificate())
    return certs, w, cond


def cmd_certify(s: Setup, force: bool):
    """Evaluate every applicable existence certificate and write one row per certificate."""
    cfg = s.cfg
    certs, _, cond = evaluate_certificates(s.plan, s.phi, s.f, cfg.q, cfg.T, cfg.J, cfg.gamma,
                                           cfg.A)
    tables.write_certificates(s.out / "certificates.csv", certs)
    for c in certs:
        if c.trace:
            width = len(c.trace[0])
            header = ["t", "value"] if width == 2 else ["t", "h", "H", "lhs"][:width]
            tables.write_csv(s.out / f"trace_{c.condition_id}.csv", header, c.trace)
    if s.f.kind == "power_law":
        ce = critical_exponent(s.domain.n, s.f.p)
        cls = ce.classify(cfg.q)
        tables.write_csv(s.out / "regime.csv", ["n", "p", "q", "q_c", "regime", "flagged", "C_p"],
                         [(s.domain.n, s.f.p, cfg.q, ce.q_c, cls.regime, cls.flagged,
                           cp_constant(s.f.p))])
    ok = any(c.valid for c in certs if c.condition_id in EXISTENCE_IDS)
    lines = [f"{c.condition_id}: {'valid' if c.valid else 'invalid'} T={tables.fmt(c.horizon)}"
             for c in certs]
    summary = (tables.CERTIFICATE_COLUMNS, [tables.certificate_row(c) for c in certs])
    return (EXIT_OK if ok else EXIT_INVALID), summary, "\n".join(lines)


# -- iterate and compare ------------------------------------------------------------

def _certified_solve(s: Setup, force: bool, T: float):
    """prop32 supersolution and the monotone iteration started from it."""
    cfg = s.cfg
    A = _A(cfg, s.f)
    try:
        w, cert = build_prop32_supersolution(s.plan, s.phi, s.f, RegularityGauge.power(s.phi, cfg.q),
                                             A, T, J=cfg.J, gamma=cfg.gamma)
    except GaugeError as exc:
        raise NumericalFailure(str(exc)) from None
    if not cert.valid and not force:
        return w, cert, None, None
    u, report = monotone_solve(s.plan, s.phi, s.f, w, tol=cfg.iterate_tol, max_iter=cfg.max_iter,
                               force=force)
    return w, cert, u, report


def _sandwich_rows(rep):
    return [("lower", rep.lower_gap, *rep.lower_worst[:1]), ("upper", rep.upper_gap, *rep.upper_worst[:1])]


def cmd_iterate(s: Setup, force: bool):
    """Monotone iteration from the certified supersolution, with a sandwich report."""
    T = _finite_T(s.cfg)
    w, cert, u, report = _certified_solve(s, force, T)
    summary = [("certificate_valid", cert.valid, cert.valid), ("certificate_margin", cert.margin, cert.valid)]
    if u is None:
        return EXIT_INVALID, (SUMMARY_COLUMNS, summary), "no valid certificate; rerun with --force to iterate anyway"
    tables.write_iteration_report(s.out / "residuals.csv", report)
    tables.write_space_time(s.out / "solution.csv", u)
    summary += [("converged", report.converged, report.converged),
                ("iterations", report.iterations_used, 1),
                ("final_residual", report.residual_history[-1], report.converged),
                ("overflow", report.overflow, not report.overflow)]
    if report.overflow or not report.converged:
        return EXIT_NUMERIC, (SUMMARY_COLUMNS, summary), "iteration diverged or overflowed"
    lower = check_subsolution_chain(s.plan, s.phi, s.f, 1, T, times=w.times)[-1]
    rep = sandwich_validate(u, lower, w, SANDWICH_TOL)
    tables.write_csv(s.out / "sandwich.csv", ["side", "worst_gap", "t"], _sandwich_rows(rep))
    summary += [("sandwich_lower_gap", rep.lower_gap, rep.lower_gap <= SANDWICH_TOL),
                ("sandwich_upper_gap", rep.upper_gap, rep.upper_gap <= SANDWICH_TOL)]
    return (EXIT_OK if rep.ok else EXIT_NUMERIC), (SUMMARY_COLUMNS, summary), \
        f"converged in {report.iterations_used} iterations"


def ode_solution(a: float, p: float, t):
    """``y' = y^p``, ``y(0) = a``; ``inf`` past the blow-up time."""
    t = np.asarray(t, dtype=float)
    base = a ** (1 - p) - (p - 1) * t if a > 0 else np.ones_like(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(base > 0, np.power(base, -1 / (p - 1)), np.inf)
    return y if a > 0 else np.zeros_like(t)


def cmd_compare(s: Setup, force: bool):
    """Reference solver against the monotone iteration on the same setup."""
    cfg = s.cfg
    T = _finite_T(cfg)
    times = graded_time_grid(T, cfg.J, cfg.gamma)
    run = solve_reference(s.plan, s.phi, s.f, cfg.oracle_T or T, cfg.dt, record_times=times)
    tables.write_oracle_run(s.out / "oracle.csv", run)
    summary = [("oracle_outcome", run.outcome, run.outcome == "completed")]
    if run.t_star is not None:
        summary.append(("oracle_t_star", run.t_star, 1))

    n_rec = len(run.trajectory.times)
    o_sup = run.trajectory.sup_trace()
    ode_gap = np.full(n_rec, math.nan)
    if (cfg.profile_kind == "constant" and s.f.kind == "power_law"
            and s.domain.kind is DomainKind.PERIODIC_BOX):
        exact = ode_solution(cfg.amplitude, s.f.p, run.trajectory.times)
        flat = run.trajectory.values.reshape(n_rec, -1)
        ode_gap = np.abs(flat - exact[:, None]).max(axis=1)
        summary.append(("max_ode_gap", float(ode_gap.max()), 1))

    w, cert, u, report = _certified_solve(s, force, T)
    summary.append(("certificate_valid", cert.valid, 1))
    solver_sup = np.full(n_rec, math.nan)
    gaps = np.full(n_rec, math.nan)
    code, message = EXIT_OK, ""
    if u is not None and (report.overflow or not report.converged):
        summary.append(("solver_converged", False, False))
        code, message = EXIT_NUMERIC, "iteration diverged or overflowed"
    elif u is not None:
        summary.append(("solver_converged", True, True))
        solver_sup[:] = u.sup_trace()[:n_rec]
        shared = run.trajectory.values - u.values[:n_rec]
        gaps = np.abs(shared).reshape(n_rec, -1).max(axis=1)
        summary.append(("max_gap", float(gaps.max()), 1))
        if run.outcome == "completed":
            lower = check_subsolution_chain(s.plan, s.phi, s.f, 1, T, times=w.times)[-1]
            rep = sandwich_validate(run, lower, w, cfg.compare_tol)
            tables.write_csv(s.out / "sandwich.csv", ["side", "worst_gap", "t"], _sandwich_rows(rep))
            summary += [("sandwich_lower_gap", rep.lower_gap, rep.lower_gap <= cfg.compare_tol),
                        ("sandwich_upper_gap", rep.upper_gap, rep.upper_gap <= cfg.compare_tol)]
            if not rep.ok:
                code, message = EXIT_NUMERIC, "reference solution leaves the certified sandwich"
        elif cert.valid:
            code, message = EXIT_NUMERIC, "reference solver blew up inside a certified horizon"
    else:
        summary.append(("solver_converged", "skipped", 1))
    rows = zip(run.trajectory.times, o_sup, solver_sup, gaps, ode_gap)
    tables.write_csv(s.out / "gaps.csv", ["t", "oracle_sup", "solver_sup", "max_gap", "ode_gap"], rows)
    return code, (SUMMARY_COLUMNS, summary), message


# -- scan -------------------------------------------------------------------------

SCAN_COLUMNS = ("amplitude", "p", "q", "best_certificate", "horizon", "margin", "oracle_blowup")


def best_certificate(certs) -> Certificate | None:
    valid = [c for c in certs if c.valid and c.condition_id in EXISTENCE_IDS]
    if not valid:
        return None
    return max(valid, key=lambda c: (c.horizon, c.margin))


def cmd_scan(s: Setup, force: bool):
    """Sweep amplitude and (p, q); emit a phase table of the best certificate per point."""
    cfg = s.cfg
    if s.f.kind != "power_law" and (cfg.scan_p or cfg.scan_amplitudes):
        raise ConfigError("scan needs a power-law nonlinearity")
    ps = cfg.scan_p or (cfg.p,)
    qs = cfg.scan_q or (cfg.q,)
    rows, summary, code = [], [], EXIT_OK
    for p in ps:
        f = Nonlinearity.power_law(p)
        for q in qs:
            block = []
            for a in cfg.scan_amplitudes:
                phi = cfg.field(s.domain, a)
                certs, _, _ = evaluate_certificates(s.plan, phi, f, q, cfg.T, cfg.J, cfg.gamma, cfg.A)
                best = best_certificate(certs)
                blow = math.nan
                if cfg.scan_oracle:
                    horizon = cfg.oracle_T or _finite_T(cfg)
                    run = solve_reference(s.plan, phi, f, horizon, cfg.dt)
                    blow = run.t_star if run.blew_up else math.inf
                row = (a, p, q, best.condition_id if best else "none",
                       best.horizon if best else 0.0, best.margin if best else math.nan, blow)
                rows.append(row)
                block.append(row)
            if not block:
                continue
            ordered = sorted(block, key=lambda r: r[0])
            horizons = [r[4] for r in ordered]
            monotone = all(h1 >= h2 for h1, h2 in zip(horizons, horizons[1:]))
            boundary = next((r[0] for r in ordered if not math.isinf(r[4])), math.inf)
            summary.append((f"global_boundary_p{p:g}_q{q:g}", boundary, 1))
            summary.append((f"horizon_monotone_p{p:g}_q{q:g}", monotone, monotone))
            if not monotone:
                code = EXIT_NUMERIC
    tables.write_csv(s.out / "phase.csv", SCAN_COLUMNS, rows)
    return code, (SUMMARY_COLUMNS, summary), "" if code == EXIT_OK else "certified horizon not monotone in amplitude"


for _fn in (cmd_semigroup_probe, cmd_certify, cmd_iterate, cmd_compare, cmd_scan):
    _command(_fn)


if __name__ == "__main__":
    main()
