import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellcv import _backend, _pykernels
from bellcv.states import bands_to_dense

BACKENDS = [pytest.param(_pykernels, id="python")]
if _backend.compiled_kernels is not None:
    BACKENDS.append(pytest.param(_backend.compiled_kernels, id="cython"))


def test_backend_selection_reports_name():
    assert _backend.BACKEND in ("cython", "python")
    expected = _backend.compiled_kernels if _backend.BACKEND == "cython" else _pykernels
    assert _backend.kernels is expected


@pytest.mark.parametrize("mod", BACKENDS)
def test_hermite_functions_recurrence(mod):
    u = np.linspace(-6, 6, 13)
    table = mod.hermite_functions(u, 40)
    # three-term recurrence in normalized form
    n = np.arange(1, 40)[:, None]
    lhs = table[2:]
    rhs = np.sqrt(2.0 / (n + 1)) * u * table[1:-1] - np.sqrt(n / (n + 1.0)) * table[:-2]
    assert np.abs(lhs - rhs).max() < 1e-14


@pytest.mark.parametrize("mod", BACKENDS)
def test_backends_agree_on_overlaps(mod):
    for b in (-3.1, -0.2, 0.0, 0.7, 5.5):
        ref = _pykernels.halfline_overlaps(b, 200)
        assert np.abs(mod.halfline_overlaps(b, 200) - ref).max() < 1e-13


def _random_bands(rng, size, offsets):
    bands = rng.normal(size=(len(offsets), size)) + 1j * rng.normal(size=(len(offsets), size))
    for j, o in enumerate(offsets):
        if o > 0:
            bands[j, size - o:] = 0
        elif o < 0:
            bands[j, :-o] = 0
    return bands


@pytest.mark.parametrize("mod", BACKENDS)
@given(size=st.integers(3, 40), seed=st.integers(0, 2**31), width=st.integers(0, 2))
@settings(max_examples=40, deadline=None)
def test_banded_bilinear_matches_dense(mod, size, seed, width):
    rng = np.random.default_rng(seed)
    offsets = np.arange(-width, width + 1, dtype=np.int64)
    bands = _random_bands(rng, size, offsets)
    left = rng.normal(size=(size, size))
    right = rng.normal(size=(size, size))
    C = bands_to_dense(bands, offsets)
    dense = np.sum(np.conj(C) * (left @ C @ right.T))
    got = mod.banded_bilinear(bands, offsets, left, right)
    scale = np.abs(C).sum() ** 2 * max(np.abs(left).max(), 1) * max(np.abs(right).max(), 1)
    assert abs(got - dense) <= 1e-13 * scale


@pytest.mark.parametrize("mod", BACKENDS)
def test_banded_bilinear_accepts_read_only_inputs(mod):
    rng = np.random.default_rng(1)
    offsets = np.array([-2, 0, 2], dtype=np.int64)
    bands = _random_bands(rng, 12, offsets)
    mats = [rng.normal(size=(12, 12)) for _ in range(2)]
    for arr in (offsets, bands, *mats):
        arr.setflags(write=False)
    mod.banded_bilinear(bands, offsets, *mats)
