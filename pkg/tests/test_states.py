import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellcv.chsh import quadrant_probabilities
from bellcv.numerics import ErrorBudget
from bellcv.states import (
    BvParams,
    DoubleGaussian,
    PolyGaussianSpec,
    TruncationError,
    auto_banded_modal,
    bv_wavefunction,
    double_gaussian_schmidt,
    minus_mode_coefficients,
    poly_gaussian_wavefunction,
    polynomial_mode_coefficients,
    schmidt_mu,
    to_banded_modal,
)

from conftest import SMALL_BV


def test_minus_factor_coefficients():
    got = minus_mode_coefficients(BvParams(1.0, 0.01))
    np.testing.assert_allclose(got, np.array([-3.0, 0.0, math.sqrt(2.0)]) / math.sqrt(11.0), atol=1e-12)


def test_polynomial_coefficients_of_x():
    # x phi_0 = sigma phi_1
    np.testing.assert_allclose(polynomial_mode_coefficients([0.0, 1.0], 0.4), [0.0, 1.0], atol=1e-15)


def test_bv_normalization_closed_form():
    p = BvParams(0.1, 0.03)
    psi = bv_wavefunction(p)
    xp = np.linspace(-1.2, 1.2, 801)
    xm = np.linspace(-0.4, 0.4, 801)
    XP, XM = np.meshgrid(xp, xm, indexing="ij")
    vals = psi((XP + XM) / math.sqrt(2), (XP - XM) / math.sqrt(2)) ** 2
    assert np.trapezoid(np.trapezoid(vals, xm, axis=1), xp) == pytest.approx(1.0, abs=1e-10)


def test_poly_gaussian_norm_matches_bv():
    p = BvParams(0.2, 0.05)
    spec = PolyGaussianSpec(p.poly_coeffs(), p.sigma_plus, p.sigma_minus)
    x1 = np.array([0.0, 0.13, -0.4])
    x2 = np.array([0.05, -0.02, -0.35])
    np.testing.assert_allclose(poly_gaussian_wavefunction(spec)(x1, x2), bv_wavefunction(p)(x1, x2), rtol=1e-12)


def test_schmidt_tail_and_weights():
    sigma0, s = double_gaussian_schmidt(1.0, 0.25, 60)
    assert sigma0 == pytest.approx(0.5)
    mu = schmidt_mu(1.0, 0.25)
    assert 1.0 - np.sum(s * s) == pytest.approx(mu**61, abs=1e-15)
    with pytest.raises(TruncationError) as info:
        double_gaussian_schmidt(1.0, 0.01, 100, tail_tol=1e-18)
    assert info.value.required_n_max > 100


def test_bv_modal_structure(small_bv):
    C = small_bv.dense()
    assert list(small_bv.offsets) == [-2, 0, 2]
    assert small_bv.bandwidth == 2
    assert np.abs(C - C.T).max() < 1e-15
    n = np.arange(small_bv.size)
    odd = (n[:, None] + n[None, :]) % 2 == 1
    assert np.abs(C[odd]).max() == 0.0
    i, j = np.nonzero(np.abs(C) > 0)
    assert np.abs(i - j).max() == 2


def test_modal_norm_and_certificate(small_bv):
    assert small_bv.norm2() == pytest.approx(1.0, abs=1e-13)
    assert small_bv.norm_residual < 1e-13
    assert small_bv.tail_mass <= ErrorBudget().tail_mass_limit


def test_pointwise_reconstruction(small_bv):
    rng = np.random.default_rng(11)
    x1, x2 = rng.normal(0.0, 0.08, (2, 30))
    exact = bv_wavefunction(SMALL_BV)(x1, x2)
    peak = abs(bv_wavefunction(SMALL_BV)(0.0, 0.0))
    assert np.abs(small_bv.amplitude(x1, x2) - exact).max() < 1e-8 * peak


def test_exchange_symmetry_and_parity(small_dg, small_bv):
    for state in (small_bv, small_dg):
        C = state.dense()
        assert np.abs(C - C.T).max() < 1e-15
        # even total parity: psi(-x1, -x2) = psi(x1, x2)
        n = np.arange(state.size)
        assert np.abs(C[(n[:, None] + n[None, :]) % 2 == 1]).max() == 0.0


def test_double_gaussian_is_diagonal(small_dg):
    C = small_dg.dense()
    assert np.abs(C - np.diag(np.diag(C))).max() == 0.0


def test_truncation_certificate_failure():
    with pytest.raises(TruncationError) as info:
        to_banded_modal(BvParams(1.0, 0.01), 15)
    assert info.value.required_n_max > 1000


def test_auto_sizing_is_certified():
    budget = ErrorBudget(abs_tol=1e-6, quadrature_tol=1e-9, truncation_tol=1e-7)
    state = auto_banded_modal(BvParams(0.5, 0.05), budget)
    assert state.tail_mass <= budget.tail_mass_limit
    with pytest.raises(TruncationError):
        to_banded_modal(BvParams(0.5, 0.05), state.basis.n_max - 40, budget)


def test_generic_polynomial_state_matches_bv_statistics():
    p = BvParams(0.1, 0.03)
    spec = PolyGaussianSpec(p.poly_coeffs() * 7.0, p.sigma_plus, p.sigma_minus)
    a = quadrant_probabilities(auto_banded_modal(p), 12.0, -9.0, 0.01, 0.0)
    b = quadrant_probabilities(auto_banded_modal(spec), 12.0, -9.0, 0.01, 0.0)
    for f in ("p_pp", "p_pm", "p_mp", "p_mm"):
        assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-13)


@given(
    c=st.lists(st.floats(-2.0, 2.0), min_size=4, max_size=4).filter(lambda v: max(map(abs, v)) > 0.1),
    x=st.tuples(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2)),
)
@settings(max_examples=25, deadline=None)
def test_generic_polynomial_reconstruction(c, x):
    # P = c0 + c1 x1 + c2 x2 + c3 x1 x2, in units of the state widths
    coeffs = np.array([[c[0], c[2] / 0.05], [c[1] / 0.05, c[3] / 0.0025]])
    spec = PolyGaussianSpec(coeffs, 0.08, 0.03)
    state = auto_banded_modal(spec)
    psi = poly_gaussian_wavefunction(spec)
    scale = np.abs(psi(np.linspace(-0.2, 0.2, 41)[:, None], np.linspace(-0.2, 0.2, 41)[None, :])).max()
    assert abs(state.amplitude(np.array([x[0]]), np.array([x[1]]))[0] - psi(x[0], x[1])) < 1e-8 * scale


def test_state_parameter_validation():
    with pytest.raises(ValueError):
        BvParams(0.01, 1.0)
    with pytest.raises(ValueError):
        DoubleGaussian(1.0, 0.0)
    with pytest.raises(ValueError):
        PolyGaussianSpec(np.zeros((2, 2)), 1.0, 0.1)
