import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from conftest import random_field
from supersol import (
    Constant,
    Domain,
    Eigenfunction,
    Field,
    Gaussian,
    PowerSingularity,
    apply_semigroup,
    jensen_check,
    make_field,
    make_plan,
    smoothing_probe,
    sup_norm_trace,
)


def test_dirichlet_eigenvalues(dirichlet, dplan):
    lam = dplan.eigenvalues
    assert lam[0] == pytest.approx(1.0)
    assert np.all(lam > 0) and np.all(np.diff(lam) >= 0)


def test_periodic_keeps_zero_mode(small_periodic):
    assert make_plan(small_periodic).eigenvalues[0] == 0.0


def test_sine_decay(dplan, sine):
    out = apply_semigroup(dplan, sine(), 0.5)
    assert out.sup == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert np.allclose(out.values, math.exp(-0.5) * sine().values, atol=1e-14)


def test_identity_at_zero(dplan, sine):
    f = sine(0.3)
    assert apply_semigroup(dplan, f, 0.0) is f


def test_negative_time_rejected(dplan, sine):
    with pytest.raises(ValueError):
        apply_semigroup(dplan, sine(), -0.1)


def test_whole_space_gaussian(whole):
    plan = make_plan(whole)
    phi = make_field(whole, Gaussian(0.0, 1.0, 1.0))
    x = whole.axes[0]
    for t in (0.001, 0.5, 2.0):
        exact = np.exp(-x ** 2 / (1 + 4 * t)) / math.sqrt(1 + 4 * t)
        assert np.max(np.abs(apply_semigroup(plan, phi, t).values - exact)) < 1e-8
    assert apply_semigroup(plan, phi, 0.5).sup == pytest.approx(3 ** -0.5, abs=1e-12)


def test_whole_space_tail_check():
    d = Domain.whole_space(5.0, grid_points=256)
    plan = make_plan(d)
    v = np.ones(d.shape)
    with pytest.raises(ValueError):
        plan.apply(Field(d, v), 0.1)


def test_sup_trace_examples(dplan, sine, dirichlet, whole):
    tr = sup_norm_trace(dplan, sine(), [0, 1, 2])
    assert np.allclose(tr[:, 1], [1, math.exp(-1), math.exp(-2)], atol=1e-12)
    zero = make_field(dirichlet, Constant(0.0))
    assert np.all(sup_norm_trace(dplan, zero, [0, 1, 2])[:, 1] == 0)
    g = make_field(whole, Gaussian(0.0, 1.0))
    tr = sup_norm_trace(make_plan(whole), g, [0, 0.5])
    assert np.allclose(tr[:, 1], [1, 3 ** -0.5], atol=1e-12)


def test_sup_trace_rejects_bad_grids(dplan, sine):
    with pytest.raises(ValueError):
        sup_norm_trace(dplan, sine(), [])
    with pytest.raises(ValueError):
        sup_norm_trace(dplan, sine(), [0, 1, 1])


def test_singular_coefficients_match_quadrature(dirichlet, dplan):
    phi = make_field(dirichlet, PowerSingularity((1.0,), 0.4, 1.5))
    coeffs = dplan.modes(phi)
    for k in (1, 2, 7):
        ref = sum(integrate.quad(lambda x: 1.5 * abs(x - 1.0) ** -0.4 * math.sin(k * x), lo, hi,
                                 limit=200)[0] for lo, hi in ((0, 1.0), (1.0, math.pi)))
        assert coeffs[k - 1] == pytest.approx(2 / math.pi * ref, rel=1e-8, abs=1e-10)


# -- smoothing ----------------------------------------------------------------------

def test_smoothing_r_equals_q_contracts(dplan, dirichlet):
    phi = make_field(dirichlet, Gaussian((1.2,), 0.4, 2.0))
    for q in (1, 2, 4):
        probe = smoothing_probe(dplan, phi, q, q, [0.01, 0.1, 1.0])
        assert probe.max_ratio <= 1 + 1e-10


def test_smoothing_sharp_constant_whole_space(whole):
    phi = make_field(whole, Gaussian(0.0, 0.2, 1.0))
    probe = smoothing_probe(make_plan(whole), phi, 1, math.inf, [4.0])
    assert probe.ratios[0] == pytest.approx((4 * math.pi) ** -0.5, rel=2e-3)
    assert probe.max_ratio < (4 * math.pi) ** -0.5


def test_smoothing_vanishes_for_bounded_data(dplan, sine):
    times = np.array([1e-8, 1e-6, 1e-4, 1e-2])
    probe = smoothing_probe(dplan, sine(), 2, math.inf, times)
    exact = times ** 0.25 * np.exp(-times) / math.sqrt(math.pi / 2)
    assert np.allclose(probe.ratios, exact, rtol=1e-10)
    assert np.all(np.diff(probe.ratios) > 0)


def test_smoothing_rejects_q_above_r(dplan, sine):
    with pytest.raises(ValueError):
        smoothing_probe(dplan, sine(), 3, 2, [0.1])


# -- Jensen -------------------------------------------------------------------------

def test_jensen_trivial_cases(dplan, sine):
    assert jensen_check(dplan, sine(), 1.0, 0.3).min_gap == pytest.approx(0.0, abs=1e-14)
    assert jensen_check(dplan, sine(), 2.5, 0.0).min_gap == 0.0


def test_jensen_sine_squared_against_series(dplan, sine, dirichlet):
    # S(0.5)(sin^2)(pi/2) from the damped sine series of sin^2
    b = [2 / math.pi * integrate.quad(lambda x: math.sin(x) ** 2 * math.sin(k * x), 0, math.pi,
                                         limit=400)[0]
         for k in range(1, 200)]
    series = sum(bk * math.exp(-k ** 2 * 0.5) * math.sin(k * math.pi / 2) for k, bk in enumerate(b, 1))
    mid = dirichlet.shape[0] // 2
    g2 = apply_semigroup(dplan, sine().power(2), 0.5).values[mid]
    assert g2 == pytest.approx(series, abs=1e-10)
    assert series >= math.exp(-1)
    assert jensen_check(dplan, sine(), 2, 0.5).holds


def test_jensen_rejects_small_r(dplan, sine):
    with pytest.raises(ValueError):
        jensen_check(dplan, sine(), 0.5, 0.1)


@given(seed=st.integers(0, 2 ** 31), r=st.sampled_from([1, 1.5, 2, 3]),
       t=st.sampled_from([0.01, 0.1, 1.0]), smooth=st.booleans())
def test_jensen_random_fields(small_dirichlet, seed, r, t, smooth):
    plan = make_plan(small_dirichlet)
    f = Field(small_dirichlet, random_field(small_dirichlet, np.random.default_rng(seed), smooth))
    assert jensen_check(plan, f, r, t).min_gap >= -1e-10


# -- semigroup invariants -------------------------------------------------------------

DOMAINS = {
    "dirichlet": Domain.dirichlet(grid_points=64, mode_cutoff=32),
    "periodic": Domain.periodic(grid_points=64, mode_cutoff=32),
    "dirichlet2d": Domain.dirichlet(n=2, grid_points=32, mode_cutoff=16),
}


@given(seed=st.integers(0, 2 ** 31), kind=st.sampled_from(sorted(DOMAINS)),
       t=st.floats(0.01, 1.0), s=st.floats(0.01, 1.0))
def test_semigroup_property(seed, kind, t, s):
    d = DOMAINS[kind]
    plan = make_plan(d)
    f = Field(d, random_field(d, np.random.default_rng(seed)))
    two = plan.apply_values(plan.apply_values(f.values, s), t)
    one = plan.apply_values(f.values, t + s)
    assert np.max(np.abs(two - one)) <= 1e-10 * max(1.0, f.sup)


def test_semigroup_property_whole_space():
    d = Domain.whole_space(10.0, grid_points=256)
    plan = make_plan(d)
    f = make_field(d, Gaussian(0.5, 0.7, 2.0))
    two = plan.apply_values(plan.apply_values(f.values, 0.3), 0.4)
    assert np.max(np.abs(two - plan.apply_values(f.values, 0.7))) < 1e-10


@given(seed=st.integers(0, 2 ** 31), kind=st.sampled_from(sorted(DOMAINS)), t=st.floats(1e-4, 2.0))
def test_positivity_and_order(seed, kind, t):
    d = DOMAINS[kind]
    plan = make_plan(d)
    rng = np.random.default_rng(seed)
    f = random_field(d, rng)
    g = f + random_field(d, rng)
    Sf = plan.apply_values(f, t)
    Sg = plan.apply_values(g, t)
    assert Sf.min() >= -1e-12
    assert np.all(Sf <= Sg + 1e-12)


@given(seed=st.integers(0, 2 ** 31))
def test_dirichlet_sup_decays(small_dirichlet, seed):
    plan = make_plan(small_dirichlet)
    f = Field(small_dirichlet, random_field(small_dirichlet, np.random.default_rng(seed), smooth=True))
    tr = sup_norm_trace(plan, f, np.linspace(0, 2, 41))
    assert np.all(np.diff(tr[:, 1]) <= 1e-12)


def test_2d_eigenfunction_decay():
    d = Domain.dirichlet(n=2, grid_points=64, mode_cutoff=32)
    plan = make_plan(d)
    f = make_field(d, Eigenfunction((1, 1)))
    assert apply_semigroup(plan, f, 0.25).sup == pytest.approx(math.exp(-0.5), abs=1e-12)
