import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellcv.numerics import (
    ErrorBudget,
    HermiteBasisSpec,
    QuadratureError,
    adaptive_halfline_overlap,
    adaptive_quad,
    complement_matrix,
    gauss_hermite_nodes,
    gram_matrix,
    halfline_overlap,
    hermite_eval,
    hermite_exact,
    mode_eval,
    mode_table,
    overlap_matrix,
    truncation_error,
)

# H_n values from the explicit sum, worked by hand for n = 5 and frozen for the rest
FROZEN_HERMITE = {(10, Fraction(1, 2)): 22591, (5, 2): -16, (25, Fraction(3, 2)): -26420900428094157}


@pytest.mark.parametrize("key,value", FROZEN_HERMITE.items())
def test_hermite_exact_frozen(key, value):
    assert hermite_exact(*key) == value


@pytest.mark.parametrize("n", range(0, 31, 3))
@pytest.mark.parametrize("u", [Fraction(1, 2), Fraction(-7, 4), Fraction(3)])
def test_hermite_recurrence_matches_exact(n, u):
    exact = float(hermite_exact(n, u))
    assert hermite_eval(n, float(u)) == pytest.approx(exact, rel=1e-13, abs=1e-13)


def test_hermite_overflow_is_reported():
    with pytest.raises(OverflowError):
        hermite_eval(400, 30.0)


def test_mode_table_survives_large_degree():
    spec = HermiteBasisSpec(1.0, 2000)
    vals = mode_table(spec, np.array([0.0, 10.0, 80.0]))
    assert np.all(np.isfinite(vals))
    # the phi_n are bounded by (2 pi sigma0^2)^(-1/4) pointwise
    assert np.abs(vals).max() <= (2 * math.pi) ** -0.25 + 1e-12


def test_ground_mode_is_gaussian_with_sd_sigma0():
    spec = HermiteBasisSpec(0.3, 0)
    x = np.linspace(-1, 1, 9)
    expected = np.exp(-x * x / (4 * 0.09)) / (2 * math.pi * 0.09) ** 0.25
    np.testing.assert_allclose(mode_table(spec, x)[0], expected, rtol=1e-14)


def test_orthonormality_by_gauss_hermite():
    gram = gram_matrix(HermiteBasisSpec(0.07, 150))
    assert np.abs(gram - np.eye(151)).max() < 1e-12


def test_gauss_hermite_nodes_integrate_gaussian():
    spec = HermiteBasisSpec(0.2, 4)
    x, w = gauss_hermite_nodes(spec, 30)
    assert np.sum(w * mode_table(spec, x)[0] ** 2) == pytest.approx(1.0, abs=1e-14)


@given(n=st.integers(0, 40), c=st.floats(0.1, 10.0), x=st.floats(-3.0, 3.0))
@settings(max_examples=60, deadline=None)
def test_mode_scale_covariance(n, c, x):
    # phi_n(x; sigma) = phi_n(x / c; sigma / c) / sqrt(c)
    a = mode_eval(HermiteBasisSpec(0.5, n), n, x)
    b = mode_eval(HermiteBasisSpec(0.5 / c, n), n, x / c) / math.sqrt(c)
    assert a == pytest.approx(b, rel=1e-11, abs=1e-13)


def test_overlap_against_quadrature_random_triples():
    rng = np.random.default_rng(2024)
    spec = HermiteBasisSpec(1.0, 256)
    worst = 0.0
    for _ in range(50):
        n, m = (int(v) for v in rng.integers(0, 257, 2))
        a = float(rng.uniform(-1.2, 1.2) * spec.unit * math.sqrt(2 * max(n, m) + 1))
        ref, err = adaptive_halfline_overlap(spec, n, m, a, tol=1e-12)
        worst = max(worst, abs(halfline_overlap(spec, n, m, a) - ref))
    assert worst < 1e-10


@pytest.mark.parametrize("a", [-0.4, 0.0, 0.013, 0.25])
def test_overlap_matrix_symmetric_and_spot_checked(a):
    spec = HermiteBasisSpec(0.1, 300)
    mat = overlap_matrix(spec, a, spot_checks=4)
    assert np.array_equal(mat, mat.T)
    eig = np.linalg.eigvalsh(mat)
    # a projector restricted to a subspace: spectrum inside [0, 1]
    assert eig.min() > -1e-12 and eig.max() < 1 + 1e-12


@pytest.mark.parametrize("a", [-0.3, 0.0, 0.05, 1.7])
def test_overlap_plus_complement_is_identity(a):
    spec = HermiteBasisSpec(0.2, 400)
    total = overlap_matrix(spec, a, spot_checks=0) + complement_matrix(spec, a)
    assert np.abs(total - np.eye(spec.size)).max() < 1e-12


def test_overlap_limits():
    spec = HermiteBasisSpec(0.2, 50)
    assert np.abs(overlap_matrix(spec, -math.inf) - np.eye(51)).max() < 1e-13
    assert np.abs(overlap_matrix(spec, math.inf)).max() < 1e-13
    # half of each normalized mode lies on either side of the origin
    np.testing.assert_allclose(np.diag(overlap_matrix(spec, 0.0)), 0.5, atol=1e-13)


def test_overlap_index_validation():
    spec = HermiteBasisSpec(1.0, 5)
    with pytest.raises(ValueError):
        halfline_overlap(spec, 6, 0, 0.0)


def test_error_budget_tail_limit_inverts_truncation_error():
    budget = ErrorBudget()
    assert truncation_error(budget.tail_mass_limit) == pytest.approx(budget.truncation_tol, rel=1e-9)
    with pytest.raises(ValueError):
        ErrorBudget(abs_tol=1e-9, quadrature_tol=1e-9, truncation_tol=1e-9)
    with pytest.raises(ValueError):
        ErrorBudget(abs_tol=-1.0)


def test_adaptive_quad_reports_unreachable_tolerance():
    with pytest.raises(QuadratureError):
        adaptive_quad(lambda x: math.sin(1.0 / x) if x else 0.0, 0.0, 1.0, 1e-15, limit=20)


def test_basis_spec_validation():
    with pytest.raises(ValueError):
        HermiteBasisSpec(0.0, 3)
    with pytest.raises(ValueError):
        HermiteBasisSpec(1.0, -1)
