import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellcv import chsh as chsh_mod
from bellcv.chsh import (
    TSIRELSON,
    ChshEngine,
    ChshSettings,
    ProbabilityError,
    QuadrantProbs,
    chsh_branches,
    chsh_value,
    correlation,
    oracle_quadrant_probabilities,
    quadrant_probabilities,
)
from bellcv.states import BvParams, auto_banded_modal, bv_wavefunction

from conftest import SMALL_BV

# Direct 2D adaptive quadrature of |psi|^2 over the four quadrants at z = 0
# (scipy dblquad, epsabs 1e-14), frozen.
FROZEN_QUADRANTS = {
    ("bv", 0.0, 0.0): (0.43243479274588925, 0.06756520725411078, 0.06756520725411078, 0.43243479274588925),
    ("bv", 0.02, -0.01): (0.3752766158690254, 0.016198849622393676, 0.1795009531463049, 0.42902358136227603),
    ("dg", 0.02, -0.01): (0.3601516408911662, 0.03307687667752249, 0.19372311565700842, 0.4130483667743042),
}
# E(0, 0) of the 1 mm / 0.01 mm Bell state by 1D adaptive quadrature in
# (x_+, x_-) after integrating x_+ analytically, frozen.
FROZEN_REF_E00 = 0.9907403846653868


@pytest.mark.parametrize("key", FROZEN_QUADRANTS)
def test_quadrants_at_source_plane_match_quadrature(key, small_bv, small_dg):
    state = small_bv if key[0] == "bv" else small_dg
    q = quadrant_probabilities(state, 0.0, 0.0, key[1], key[2])
    got = (q.p_pp, q.p_pm, q.p_mp, q.p_mm)
    assert np.abs(np.array(got) - np.array(FROZEN_QUADRANTS[key])).max() < 1e-12


def test_ref_state_source_plane_correlation(ref_state):
    e = ChshEngine(ref_state).correlation(0.0, 0.0)
    assert e == pytest.approx(FROZEN_REF_E00, abs=1e-10)


@given(z1=st.floats(-40, 40), z2=st.floats(-40, 40))
@settings(max_examples=20, deadline=None)
def test_bv_sign_symmetry_and_completeness(small_bv, z1, z2):
    q = quadrant_probabilities(small_bv, z1, z2)
    assert abs(q.p_pp - q.p_mm) < 1e-12
    assert abs(q.p_pm - q.p_mp) < 1e-12
    assert abs(q.total - 1.0) < 1e-10
    for p in (q.p_pp, q.p_pm, q.p_mp, q.p_mm):
        assert -1e-12 <= p <= 1 + 1e-12


def test_correlation_examples():
    assert correlation(QuadrantProbs(1, 0, 0, 0, 0, 0)) == 1
    assert correlation(QuadrantProbs(0.25, 0.25, 0.25, 0.25, 0, 0)) == 0


def test_branches():
    assert chsh_branches(0.5, -0.5, 0.2, 0.3) == (0.5, 1.5)


@given(z=st.floats(-30, 30), w=st.floats(-30, 30))
@settings(max_examples=10, deadline=None)
def test_degenerate_settings_collapse(small_bv, z, w):
    res = chsh_value(small_bv, ChshSettings(z, z, w, w))
    e = ChshEngine(small_bv).correlation(z, w)
    assert res.s_max == pytest.approx(2 * abs(e), abs=1e-15)
    assert res.s_max <= 2.0 + 1e-12


def test_exchange_symmetry(small_bv):
    eng = ChshEngine(small_bv)
    for z, w in ((3.0, -11.0), (25.0, 2.5), (-7.0, -40.0)):
        assert abs(eng.correlation(z, w) - eng.correlation(w, z)) < 1e-10


def test_result_consistency_and_determinism(small_bv):
    st_ = ChshSettings(-12.0, 4.0, -12.0, 4.0, 0.003, -0.002)
    a = chsh_value(small_bv, st_)
    b = chsh_value(small_bv, st_)
    assert a == b
    s_minus, s_plus = chsh_branches(*a.correlations)
    assert (a.s_minus, a.s_plus) == (s_minus, s_plus)
    assert a.s_max == max(s_minus, s_plus)
    assert a.branch in ("minus", "plus")
    assert all(abs(e) <= 1 for e in a.correlations)


def test_numpy_scalars_do_not_change_results(small_bv):
    a = chsh_value(small_bv, ChshSettings(np.float64(-3.0), 8.0, np.float32(2.0), 0.0))
    b = chsh_value(small_bv, ChshSettings(-3.0, 8.0, 2.0, 0.0))
    assert a == b


def test_bell_state_violates_and_respects_tsirelson():
    # ratio 10; optimal distances scale with sigma_-^2, near (105, -30) mm here
    eng = ChshEngine(auto_banded_modal(BvParams(0.3, 0.03)))
    best = max(
        eng.chsh(ChshSettings(a, b, a, b)).s_max
        for a in np.arange(-150.0, 151.0, 15.0)
        for b in np.arange(-150.0, 151.0, 15.0)
    )
    assert 2.0 < best <= TSIRELSON + 1e-9


def test_error_bound_reported(ref_state):
    res = chsh_value(ref_state, ChshSettings(-11.8, 3.9, -11.8, 3.9))
    assert 0 < res.err_bound <= 1e-8
    assert res.s_max > 2.0


def test_settings_validation():
    with pytest.raises(ValueError):
        ChshSettings(math.nan, 0, 0, 0)
    with pytest.raises(ValueError):
        ChshSettings(0, 0, math.inf, 0)


def test_imaginary_residue_is_an_error(small_bv, monkeypatch):
    class Broken:
        @staticmethod
        def banded_bilinear(*args):
            return complex(0.25, 1e-6)

    monkeypatch.setattr(chsh_mod, "kernels", Broken)
    with pytest.raises(ProbabilityError):
        ChshEngine(small_bv).quadrant_probabilities(1.0, 2.0)


def test_modal_matches_fresnel_oracle(small_bv):
    psi = bv_wavefunction(SMALL_BV)
    q = ChshEngine(small_bv).quadrant_probabilities(10.0, -20.0, 0.01, -0.02)
    o = oracle_quadrant_probabilities(psi, 10.0, -20.0, 0.01, -0.02, half_width=1.0, step=0.001,
                                      out_half_width=1.4, panels=32)
    for f in ("p_pp", "p_pm", "p_mp", "p_mm"):
        assert getattr(q, f) == pytest.approx(getattr(o, f), abs=1e-6)
