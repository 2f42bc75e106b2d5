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
    Nonlinearity,
    PowerSingularity,
    ProfileError,
    Table,
    lq_norm,
    make_field,
    pointwise_compare,
)
from supersol.field_core import from_spectral, to_spectral


# -- construction ------------------------------------------------------------------

def test_sine_profile(dirichlet):
    f = make_field(dirichlet, Eigenfunction((1,), 1.0))
    x = dirichlet.axes[0]
    assert np.allclose(f.values, np.sin(x), atol=1e-15)
    assert f.sup == pytest.approx(1.0)


def test_gaussian_profile(whole):
    f = make_field(whole, Gaussian(0.0, 1.0, 1.0))
    x = whole.axes[0]
    assert np.allclose(f.values, np.exp(-x ** 2))
    assert f.sup == pytest.approx(1.0)


def test_zero_constant(dirichlet):
    f = make_field(dirichlet, Constant(0.0))
    assert f.is_zero
    for q in (1, 2, 7.5, math.inf):
        assert lq_norm(f, q) == 0.0


def test_negative_amplitude_rejected(dirichlet):
    with pytest.raises(ProfileError) as exc:
        make_field(dirichlet, Eigenfunction((1,), -1.0))
    assert exc.value.code == "negative_amplitude"


def test_non_integrable_singularity_rejected(dirichlet):
    with pytest.raises(ProfileError) as exc:
        make_field(dirichlet, PowerSingularity((1.0,), 1.0))
    assert exc.value.code == "not_integrable"


def test_singular_center_node_is_capped(dirichlet):
    x0 = dirichlet.axes[0][256]
    f = make_field(dirichlet, PowerSingularity((x0,), 0.5))
    assert np.all(np.isfinite(f.values))
    assert f.values[256] == pytest.approx(max(f.values[255], f.values[257]))
    assert f.singularity.lq_range(1) == pytest.approx(2.0)


def test_negative_values_rejected(dirichlet):
    v = np.zeros(dirichlet.shape)
    v[10] = -1e-3
    with pytest.raises(ProfileError):
        Field(dirichlet, v)


def test_roundoff_negatives_clamped(dirichlet):
    v = np.ones(dirichlet.shape)
    v[3] = -1e-16
    assert Field(dirichlet, v).values[3] == 0.0


def test_nonfinite_rejected(dirichlet):
    v = np.ones(dirichlet.shape)
    v[3] = np.nan
    with pytest.raises(ValueError):
        Field(dirichlet, v)


def test_whole_space_tail_rejected():
    d = Domain.whole_space(3.0)
    with pytest.raises(ProfileError) as exc:
        make_field(d, Gaussian(0.0, 2.0))
    assert exc.value.code == "tail_tolerance"


def test_field_values_read_only(dirichlet):
    f = make_field(dirichlet, Constant(1.0))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_table_profile(small_dirichlet):
    vals = np.linspace(0, 1, small_dirichlet.shape[0])
    f = make_field(small_dirichlet, Table(vals))
    assert np.array_equal(f.values, vals)


def test_domain_requires_resolved_modes():
    with pytest.raises(ValueError):
        Domain.dirichlet(grid_points=100, mode_cutoff=64)


# -- norms ------------------------------------------------------------------------

def test_lq_sine(sine):
    assert lq_norm(sine(), 2) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)
    assert lq_norm(sine(), math.inf) == 1.0


def test_lq_rejects_small_q(sine):
    with pytest.raises(ValueError):
        lq_norm(sine(), 0.5)


def test_lq_2d_sine_product():
    d = Domain.dirichlet(n=2, grid_points=128, mode_cutoff=32)
    f = make_field(d, Eigenfunction((1, 1), 1.0))
    assert lq_norm(f, 2) == pytest.approx(math.pi / 2, rel=1e-10)


def test_lq_singular_matches_quadrature(dirichlet):
    f = make_field(dirichlet, PowerSingularity((1.0,), 0.3, 2.0))
    exact = sum(integrate.quad(lambda x: (2 * abs(x - 1.0) ** -0.3) ** 2, lo, hi)[0]
                for lo, hi in ((0, 1.0), (1.0, math.pi))) ** 0.5
    assert lq_norm(f, 2) == pytest.approx(exact, rel=1e-8)
    assert lq_norm(f, math.inf) == math.inf
    assert lq_norm(f, 4) == math.inf


def test_lq_singular_2d_matches_quadrature():
    d = Domain.dirichlet(sides=1.0, n=2, grid_points=64, mode_cutoff=32)
    f = make_field(d, PowerSingularity((0.3, 0.6), 0.5))
    exact = integrate.dblquad(lambda y, x: ((x - 0.3) ** 2 + (y - 0.6) ** 2) ** -0.25,
                              0, 1, 0, 1, epsabs=1e-11)[0]
    assert lq_norm(f, 1) == pytest.approx(exact, rel=1e-6)


@given(seed=st.integers(0, 2 ** 31), q=st.floats(1, 20))
def test_lq_monotone_in_field(small_dirichlet, seed, q):
    rng = np.random.default_rng(seed)
    f = random_field(small_dirichlet, rng)
    g = f + rng.random(f.shape) * (~small_dirichlet.boundary_mask())
    assert lq_norm(Field(small_dirichlet, f), q) <= lq_norm(Field(small_dirichlet, g), q) * (1 + 1e-12)


def test_lq_tends_to_sup(dirichlet):
    f = make_field(dirichlet, Gaussian((1.0,), 0.5, 3.0))
    sup = lq_norm(f, math.inf)
    gaps = [abs(lq_norm(f, q) - sup) for q in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.02 * sup


# -- spectral round trip ---------------------------------------------------------------

@given(seed=st.integers(0, 2 ** 31), kind=st.sampled_from(["dirichlet", "periodic"]),
       n=st.sampled_from([1, 2]))
def test_spectral_round_trip(seed, kind, n):
    rng = np.random.default_rng(seed)
    d = (Domain.dirichlet if kind == "dirichlet" else Domain.periodic)(n=n, grid_points=32, mode_cutoff=8)
    shape = (8,) * n
    coeffs = rng.normal(size=shape)
    if kind == "periodic":
        # real field: conjugate-symmetric coefficients; -M/2 has no partner
        for axis in range(n):
            idx = [slice(None)] * n
            idx[axis] = 4
            coeffs[tuple(idx)] = 0.0
        values = from_spectral(d, coeffs + 0j)
        coeffs = to_spectral(d, values)
    values = from_spectral(d, coeffs)
    back = to_spectral(d, values)
    assert np.max(np.abs(back - coeffs)) <= 1e-10 * max(1.0, np.max(np.abs(coeffs)))


def test_eigenfunction_carries_spectral(dirichlet):
    f = make_field(dirichlet, Eigenfunction((1,), 0.7))
    assert f.spectral[0] == 0.7
    assert np.count_nonzero(f.spectral) == 1


# -- order -----------------------------------------------------------------------------

def test_compare_examples(sine):
    assert pointwise_compare(sine(0.5), sine(), 1e-12).dominated
    res = pointwise_compare(sine(), sine(0.5), 1e-12)
    assert not res.dominated
    assert res.gap == pytest.approx(0.5)
    assert res.worst_point[0] == pytest.approx(math.pi / 2)
    assert pointwise_compare(sine(), sine(), 0.0).dominated


def test_compare_mismatched_grids(sine, small_dirichlet):
    with pytest.raises(ValueError):
        pointwise_compare(sine(), make_field(small_dirichlet, Constant(1.0)))


@given(seed=st.integers(0, 2 ** 31), tol=st.floats(0, 1e-3))
def test_compare_transitive(small_dirichlet, seed, tol):
    rng = np.random.default_rng(seed)
    a = random_field(small_dirichlet, rng)
    b = np.maximum(a + rng.uniform(-tol, tol, a.shape), 0)
    c = np.maximum(b + rng.uniform(-tol, tol, a.shape), 0)
    fa, fb, fc = (Field(small_dirichlet, v) for v in (a, b, c))
    if pointwise_compare(fa, fb, tol).dominated and pointwise_compare(fb, fc, tol).dominated:
        assert pointwise_compare(fa, fc, 2 * tol).dominated


# -- nonlinearities ------------------------------------------------------------------

@given(s=st.lists(st.floats(0, 1e3), min_size=2, max_size=20),
       p=st.floats(1.01, 6))
def test_power_law_monotone_nonnegative(s, p):
    f = Nonlinearity.power_law(p)
    s = np.sort(s)
    v = f(s)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) >= 0)


def test_table_nonlinearity():
    f = Nonlinearity.monotone_table([(0, 0.5), (1, 1), (2, 3)])
    assert f(1.5) == pytest.approx(2.0)
    assert f(10.0) == 3.0
    assert f.value_at_zero == 0.5
    with pytest.raises(ValueError):
        Nonlinearity.monotone_table([(0, 1), (1, 0.5)])
    with pytest.raises(ValueError):
        Nonlinearity.power_law(1.0)


def test_escape_time():
    assert Nonlinearity.power_law(2).escape_time(2.0) == pytest.approx(0.5)
    assert Nonlinearity.zero().escape_time(1.0) == math.inf
