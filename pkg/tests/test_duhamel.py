import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_field
from supersol import (
    Constant,
    Domain,
    Nonlinearity,
    NotSupersolutionError,
    SpaceTimeField,
    apply_F,
    build_prop32_supersolution,
    check_subsolution_chain,
    check_supersolution,
    graded_time_grid,
    make_field,
    make_plan,
    monotone_solve,
)

SQUARE = Nonlinearity.power_law(2)


def test_graded_grid():
    t = graded_time_grid(2.0, 4, 2.0)
    assert np.allclose(t, [0, 2 / 16, 2 / 4, 2 * 9 / 16, 2])
    with pytest.raises(ValueError):
        graded_time_grid(math.inf)


def test_space_time_field_validation(small_dirichlet):
    times = graded_time_grid(1.0, 4)
    with pytest.raises(ValueError):
        SpaceTimeField(small_dirichlet, times[::-1], np.zeros((5,) + small_dirichlet.shape))
    with pytest.raises(ValueError):
        SpaceTimeField(small_dirichlet, times, -np.ones((5,) + small_dirichlet.shape))
    w = SpaceTimeField(small_dirichlet, times, np.ones((5,) + small_dirichlet.shape))
    assert np.array_equal(w.at(0.3), np.ones(small_dirichlet.shape))


def test_F_with_zero_source_is_linear_flow(dplan, sine):
    phi = sine(0.7)
    times = graded_time_grid(1.0, 16)
    v = SpaceTimeField.from_function(dplan.domain, times, lambda t, x: 5 + t * x)
    out = apply_F(dplan, phi, Nonlinearity.zero(), v)
    assert np.allclose(out.values, 0.7 * np.exp(-times)[:, None] * phi.values / 0.7, atol=1e-14)


def test_F_fixes_zero(dplan, dirichlet):
    zero = make_field(dirichlet, Constant(0.0))
    v = SpaceTimeField.from_semigroup(dplan, zero, graded_time_grid(1.0, 8))
    assert np.all(apply_F(dplan, zero, SQUARE, v).values == 0)


def test_F_periodic_constant(small_periodic):
    plan = make_plan(small_periodic)
    a = 1.5
    phi = make_field(small_periodic, Constant(a))
    times = graded_time_grid(1.0, 16)
    v = SpaceTimeField(small_periodic, times, np.full((17,) + small_periodic.shape, a))
    out = apply_F(plan, phi, SQUARE, v)
    assert np.allclose(out.values, (a + a ** 2 * times)[:, None], atol=1e-13)


def test_F_slice_zero_is_phi(dplan, sine):
    v = SpaceTimeField.from_semigroup(dplan, sine(0.2), graded_time_grid(1.0, 8))
    assert np.array_equal(apply_F(dplan, sine(0.2), SQUARE, v).values[0], sine(0.2).values)


def test_F_overflow_flagged(small_periodic):
    plan = make_plan(small_periodic)
    phi = make_field(small_periodic, Constant(1.0))
    times = graded_time_grid(1.0, 8)
    v = SpaceTimeField(small_periodic, times, np.full((9,) + small_periodic.shape, 1e7))
    assert apply_F(plan, phi, SQUARE, v).overflow


def test_F_quadrature_order(small_periodic):
    # residual of the exact ODE solution 1/(1 - t) shrinks like J^-2
    plan = make_plan(small_periodic)
    phi = make_field(small_periodic, Constant(1.0))
    errs = []
    for J in (32, 64, 128):
        times = graded_time_grid(0.5, J, 1.0)
        u = SpaceTimeField.from_function(small_periodic, times, lambda t, x: 1 / (1 - t) + 0 * x)
        errs.append(np.abs(apply_F(plan, phi, SQUARE, u).values - u.values).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@given(seed=st.integers(0, 2 ** 31), kind=st.sampled_from(["dirichlet", "periodic", "whole"]))
def test_F_monotone(seed, kind):
    d = {"dirichlet": Domain.dirichlet(grid_points=32, mode_cutoff=16),
         "periodic": Domain.periodic(grid_points=32, mode_cutoff=16),
         "whole": Domain.whole_space(8.0, grid_points=64, mode_cutoff=16, tail_tolerance=1.0)}[kind]
    plan = make_plan(d)
    rng = np.random.default_rng(seed)
    times = graded_time_grid(0.5, 8)
    base = np.array([random_field(d, rng) for _ in times])
    bigger = base + np.array([random_field(d, rng) for _ in times])
    phi = make_field(d, Constant(0.0))
    lo = apply_F(plan, phi, SQUARE, SpaceTimeField(d, times, base))
    hi = apply_F(plan, phi, SQUARE, SpaceTimeField(d, times, bigger))
    assert np.all(lo.values <= hi.values + 1e-10 * max(1.0, hi.values.max()))


# -- supersolution checks --------------------------------------------------------------

def test_exact_solution_is_supersolution(small_periodic):
    plan = make_plan(small_periodic)
    phi = make_field(small_periodic, Constant(1.0))
    times = graded_time_grid(0.5, 128, 1.0)
    u = SpaceTimeField.from_function(small_periodic, times, lambda t, x: 1 / (1 - t) + 0 * x)
    # exact up to quadrature error, which is below 1e-4 here
    cert = check_supersolution(plan, phi, SQUARE, u, tol=1e-4)
    assert cert.valid
    assert abs(cert.parameters["raw_margin"]) < 1e-4


def test_double_linear_flow_is_supersolution(dplan, sine):
    phi = sine(0.1)
    w = SpaceTimeField.from_semigroup(dplan, phi, graded_time_grid(0.5, 32)).scaled(2.0)
    cert = check_supersolution(dplan, phi, SQUARE, w)
    assert cert.valid and cert.margin > 0


def test_zero_is_not_supersolution(dplan, sine):
    times = graded_time_grid(1.0, 8)
    w = SpaceTimeField(dplan.domain, times, np.zeros((9,) + dplan.domain.shape))
    cert = check_supersolution(dplan, sine(0.3), SQUARE, w)
    assert not cert.valid
    assert cert.margin < 0
    # w(0) = 0 already sits below phi, and every later slice fails too
    assert cert.parameters["first_failing_time"] == 0.0
    Fw = apply_F(dplan, sine(0.3), SQUARE, w)
    assert np.all(Fw.values.max(axis=1) > 0)


# -- monotone iteration -----------------------------------------------------------------

def test_iteration_without_source_converges_at_once(dplan, sine):
    w0 = SpaceTimeField.from_semigroup(dplan, sine(0.5), graded_time_grid(1.0, 16))
    u, rep = monotone_solve(dplan, sine(0.5), Nonlinearity.zero(), w0)
    assert rep.converged and rep.iterations_used == 1
    assert rep.residual_history == [0.0]


def test_certified_sine_iteration(dplan, sine):
    phi = sine(0.2)
    w, cert = build_prop32_supersolution(dplan, phi, SQUARE, A=2.0, T=1.0)
    assert cert.valid
    u, rep = monotone_solve(dplan, phi, SQUARE, w)
    assert rep.converged
    assert np.all(np.diff(rep.residual_history) < 0)
    assert max(rep.monotonicity_violations) <= 1e-10
    assert np.array_equal(u.values[0], phi.values)
    chain = check_subsolution_chain(dplan, phi, SQUARE, 3, 1.0, times=w.times)
    for member in chain:
        assert np.all(member.values <= u.values + 1e-6)
    assert np.all(u.values <= w.values + 1e-6)


def test_constant_data_limit_is_ode_solution(small_periodic):
    plan = make_plan(small_periodic)
    phi = make_field(small_periodic, Constant(1.0))
    times = graded_time_grid(0.6, 128, 1.0)
    w0 = SpaceTimeField.from_function(small_periodic, times, lambda t, x: 1 / (1 - 1.2 * t) + 0 * x)
    u, rep = monotone_solve(plan, phi, SQUARE, w0, tol=1e-10)
    assert rep.converged
    assert u.at(0.5).max() == pytest.approx(2.0, abs=1e-3)


def test_iteration_rejects_non_supersolution(dplan, sine):
    w0 = SpaceTimeField.from_semigroup(dplan, sine(0.5), graded_time_grid(1.0, 16))
    with pytest.raises(NotSupersolutionError):
        monotone_solve(dplan, sine(0.5), SQUARE, w0)
    _, rep = monotone_solve(dplan, sine(0.5), SQUARE, w0, force=True, max_iter=3)
    assert max(rep.monotonicity_violations) > 0


def test_iteration_report_invariant(dplan, sine):
    w, _ = build_prop32_supersolution(dplan, sine(0.1), SQUARE, T=0.5)
    _, rep = monotone_solve(dplan, sine(0.1), SQUARE, w, tol=1e-8)
    assert rep.converged and rep.residual_history[-1] <= 1e-8
    assert rep.rows()[0][0] == 1


# -- subsolution chain -------------------------------------------------------------------

def test_chain_without_source(dplan, sine):
    chain = check_subsolution_chain(dplan, sine(0.4), Nonlinearity.zero(), 3, 1.0, J=16)
    for member in chain[1:]:
        assert np.allclose(member.values, chain[0].values, atol=1e-15)


def test_chain_first_member_definition(small_periodic):
    plan = make_plan(small_periodic)
    a = 0.5
    phi = make_field(small_periodic, Constant(a))
    chain = check_subsolution_chain(plan, phi, SQUARE, 1, 1.0, J=64, gamma=1.0)
    t = chain[1].times
    assert np.allclose(chain[1].values[:, 0], a + a * a * t, atol=1e-13)
    assert np.all(chain[1].values >= chain[0].values)


def test_chain_overflow_stops(small_periodic):
    plan = make_plan(small_periodic)
    phi = make_field(small_periodic, Constant(10.0))
    chain = check_subsolution_chain(plan, phi, SQUARE, 40, 1.0, J=16)
    assert chain[-1].overflow and len(chain) < 42
