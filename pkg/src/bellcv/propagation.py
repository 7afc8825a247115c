"""Free paraxial propagation of each photon's transverse coordinate.

Field convention: E = A(x, z) exp(i k z) with dA/dz = (i / 2k) d^2A/dx^2, k the
single-photon wavenumber. Under this evolution the basis modes acquire

    phi_n(x; z) = s^{-1/2} phi_n(x / s) exp(i k x^2 / 2 R(z)) exp(-i (n + 1/2) zeta)

so in any product phi_{n'}^* phi_n the curvature phase cancels and only the
Gouy factor exp(i (n' - n) zeta) and the width stretch s(z) survive.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .numerics import HermiteBasisSpec, _reduced_threshold


class CompletenessError(RuntimeError):
    """The two sign projectors failed to add up to the identity."""


class SamplingError(ValueError):
    """Sampled field violates the Nyquist or window requirements."""


@dataclass(frozen=True)
class OpticalConfig:
    wavelength_nm: float = 650.0

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be positive")

    @property
    def wavelength_mm(self) -> float:
        return self.wavelength_nm * 1e-6

    @property
    def k(self) -> float:
        """Per-photon wavenumber in 1/mm."""
        return 2.0 * math.pi / self.wavelength_mm


@dataclass(frozen=True)
class PropagatedBasis:
    spec: HermiteBasisSpec
    z: float
    k: float
    rayleigh: float
    scale: float
    gouy: float


def make_propagated_basis(spec: HermiteBasisSpec, optics: OpticalConfig, z: float) -> PropagatedBasis:
    k = optics.k
    zr = 2.0 * k * spec.sigma0**2
    return PropagatedBasis(
        spec=spec,
        z=float(z),
        k=k,
        rayleigh=zr,
        scale=math.hypot(1.0, z / zr),
        gouy=math.atan2(z, zr),
    )


class OverlapCache:
    """Thread-safe LRU of half-line overlap matrices.

    Keyed by (reduced threshold, sigma0, n_max): distances only enter through
    a = dx / s(z), so every z with dx = 0 shares one matrix.
    """

    def __init__(self, maxsize: int = 16):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, spec: HermiteBasisSpec, a: float, upper: bool) -> np.ndarray:
        key = (float(a), spec.sigma0, spec.n_max, upper)
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        if upper:
            mat = kernels.halfline_overlaps(_reduced_threshold(spec, a), spec.n_max)
        else:
            par = 1.0 - 2.0 * (np.arange(spec.size) % 2)
            mat = kernels.halfline_overlaps(_reduced_threshold(spec, -a), spec.n_max)
            mat *= np.outer(par, par)
        mat.setflags(write=False)
        with self._lock:
            self._data[key] = mat
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return mat

    def clear(self):
        with self._lock:
            self._data.clear()


_CACHE = OverlapCache()


def sign_projector_overlaps(basis: PropagatedBasis, threshold: float, sign: str, cache: OverlapCache | None = None):
    """Real part R of M = exp(i (n' - n) zeta) R for the projector on x > dx (+) or x <= dx (-)."""
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    cache = cache or _CACHE
    a = threshold / basis.scale
    return cache.get(basis.spec, a, sign == "+")


def propagated_quadrant_matrix(
    basis: PropagatedBasis,
    threshold: float,
    sign: str,
    *,
    check: bool = True,
    tol: float = 1e-12,
    cache: OverlapCache | None = None,
) -> np.ndarray:
    """M[n', n] = <phi_n'(z)| Pi_sign,dx |phi_n(z)> as a complex matrix."""
    real = sign_projector_overlaps(basis, threshold, sign, cache)
    if check:
        other = sign_projector_overlaps(basis, threshold, "-" if sign == "+" else "+", cache)
        resid = completeness_residual(real, other)
        if resid > tol:
            raise CompletenessError(
                f"|M+ + M- - I|_max = {resid:.3g} exceeds {tol:.3g} at z={basis.z}, dx={threshold}"
            )
    n = np.arange(basis.spec.size)
    phase = np.exp(1j * basis.gouy * n)
    return phase[:, None] * real * np.conj(phase)[None, :]


def completeness_residual(upper: np.ndarray, lower: np.ndarray) -> float:
    total = upper + lower
    total = total - np.eye(total.shape[0])
    return float(np.abs(total).max())


def fresnel_kernel(x_out, x_in, optics: OpticalConfig, z: float) -> np.ndarray:
    """Free paraxial propagator K(x, x'; z) at the per-photon wavenumber."""
    k = optics.k
    pref = np.sqrt(k / (2j * math.pi * z))
    d = np.asarray(x_out)[:, None] - np.asarray(x_in)[None, :]
    return pref * np.exp(1j * k * d * d / (2.0 * z))


def check_sampling(x, psi, *, edge_tol: float = 1e-10, spectral_tol: float = 1e-10):
    """Raise :class:`SamplingError` unless psi is window-contained and band-limited on x.

    ``psi`` may hold several fields as columns; they are judged against the
    largest amplitude among them, so pass them with their relative weights.
    """
    x = np.asarray(x, dtype=np.float64)
    cols = np.asarray(psi).reshape(x.size, -1)
    h = np.diff(x)
    if x.ndim != 1 or x.size < 8 or not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise SamplingError("samples must lie on a uniform 1D grid")
    peak = np.abs(cols).max()
    if peak == 0:
        raise SamplingError("field is identically zero")
    edge = max(np.abs(cols[:4]).max(), np.abs(cols[-4:]).max())
    if edge > edge_tol * peak:
        raise SamplingError(f"field not contained in window: edge/peak = {edge / peak:.3g}")
    spec = np.abs(np.fft.fft(cols, axis=0))
    high = np.abs(np.fft.fftfreq(x.size)) > 0.4
    ratio = float(spec[high].max() / spec.max())
    if ratio > spectral_tol:
        raise SamplingError(f"field not resolved: spectrum near Nyquist at {ratio:.3g} of peak")


def fresnel_oracle(
    x,
    psi,
    optics: OpticalConfig,
    z: float,
    x_out=None,
    *,
    method: str = "direct",
    chunk: int = 2048,
):
    """Propagate sampled field ``psi(x)`` by distance ``z``.

    ``psi`` is 1D or holds one field per column. ``method="direct"`` evaluates
    the Fresnel integral by the trapezoid rule at arbitrary output points; the
    chirp exp(i k (x - x')^2 / 2z) must itself be resolved on the input grid.
    ``method="angular"`` applies the exact transfer function on the FFT grid
    (output on ``x`` only).
    """
    x = np.asarray(x, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.complex128)
    check_sampling(x, psi)
    if z == 0:
        if x_out is None:
            return psi.copy()
        raise ValueError("z = 0 with off-grid output points; interpolate the samples instead")
    h = x[1] - x[0]
    k = optics.k
    if method == "angular":
        if x_out is not None:
            raise ValueError("angular method outputs on the input grid only")
        q = 2.0 * math.pi * np.fft.fftfreq(x.size, d=h)
        transfer = np.exp(-1j * q * q * z / (2.0 * k))
        if psi.ndim > 1:
            transfer = transfer[:, None]
        out = np.fft.ifft(np.fft.fft(psi, axis=0) * transfer, axis=0)
        mag = np.abs(out).reshape(x.size, -1)
        edge = np.maximum(mag[:4].max(axis=0), mag[-4:].max(axis=0))
        if np.any(edge > 1e-10 * mag.max(axis=0)):
            raise SamplingError("propagated field reaches the periodic window edge")
        return out
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    x_out = x if x_out is None else np.asarray(x_out, dtype=np.float64)
    # support of the input field, then the largest chirp frequency seen on it
    mag = np.abs(psi).reshape(x.size, -1).max(axis=1)
    live = x[mag > 1e-13 * mag.max()]
    reach = max(abs(x_out.max() - live.min()), abs(live.max() - x_out.min()))
    if h * k * reach / abs(z) > 0.8 * math.pi:
        need = 0.8 * math.pi * abs(z) / (k * reach)
        raise SamplingError(f"Fresnel chirp under-sampled: step {h:.3g} mm > {need:.3g} mm at z={z}")
    weighted = h * psi
    out = np.empty((x_out.size,) + psi.shape[1:], dtype=np.complex128)
    for start in range(0, x_out.size, chunk):
        stop = min(start + chunk, x_out.size)
        out[start:stop] = fresnel_kernel(x_out[start:stop], x, optics, z) @ weighted
    return out
