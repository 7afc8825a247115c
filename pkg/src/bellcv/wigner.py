"""Wigner functions of the +- separable states and a positivity screen.

For a state psi(x1, x2) = psi_+(x_+) psi_-(x_-) the two-particle Wigner
function factorizes as W_+(x_+, k_+) W_-(x_-, k_-) with k_+- = (k1 +- k2)/sqrt 2.

Closed forms come in two flavours. The default is the Wigner function of the
actual factors of the state. ``printed=True`` returns the widely quoted
expressions instead: a Gaussian in W_+ that is sqrt 2 wider in x than the
state's + factor, and a momentum Gaussian in W_- that is twice too narrow
(that W_- integrates to 83/352, not 1). The polynomial part of W_- is the same
in both.

A non-negative Wigner function is itself a local hidden-variable model for
position statistics at every propagation distance. Negativity proves
nothing, so the screen never reports more than "inconclusive".
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .grids import Axis
from .states import BandedModalState, BvParams, DoubleGaussian

POSITIVITY_TOL = 1e-12
_SQRT2 = math.sqrt(2.0)


# --- closed forms -------------------------------------------------------------


def wigner_plus(x_plus, k_plus, sigma_plus: float, *, printed: bool = False):
    """Gaussian W_+; at (0, 0) it equals 1/pi in both flavours."""
    _check_sigma(sigma_plus)
    x = np.asarray(x_plus, dtype=np.float64)
    k = np.asarray(k_plus, dtype=np.float64)
    s2 = sigma_plus * sigma_plus
    if printed:
        out = np.exp(-x * x / (4.0 * s2)) * np.exp(-k * k / (4.0 * (1.0 / (4.0 * sigma_plus)) ** 2))
    else:
        out = np.exp(-x * x / (2.0 * s2) - 2.0 * s2 * k * k)
    return out / math.pi


def wigner_minus(x_minus, k_minus, sigma_minus: float, *, printed: bool = False):
    """W_- of Bell's state: a quartic times Gaussians, negative near |x| = sqrt(5) sigma."""
    _check_sigma(sigma_minus)
    x = np.asarray(x_minus, dtype=np.float64)
    k = np.asarray(k_minus, dtype=np.float64)
    s2 = sigma_minus * sigma_minus
    ks2 = k * k * s2
    poly = x**4 + 2.0 * x * x * s2 * (-5.0 + 4.0 * ks2) + s2 * s2 * (11.0 + 8.0 * ks2 + 16.0 * ks2 * ks2)
    k_width = 1.0 / (4.0 * sigma_minus) if printed else 1.0 / (2.0 * sigma_minus)
    gauss = np.exp(-x * x / (2.0 * s2)) * np.exp(-k * k / (2.0 * k_width**2))
    return poly * gauss / (11.0 * math.pi * s2 * s2)


def gaussian_wigner(x, k, sigma: float):
    """Wigner function of the Gaussian amplitude with |psi|^2 of standard deviation sigma."""
    return wigner_plus(x, k, sigma)


def _check_sigma(sigma):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")


# --- the 1D factors themselves -------------------------------------------------


def bv_minus_amplitude(x, sigma_minus: float):
    """Normalized (x^2 - 4 s^2) exp(-x^2 / 4 s^2)."""
    x = np.asarray(x, dtype=np.float64)
    s2 = sigma_minus * sigma_minus
    norm = (11.0 * math.sqrt(2.0 * math.pi) * sigma_minus**5) ** -0.5
    return norm * (x * x - 4.0 * s2) * np.exp(-x * x / (4.0 * s2))


def bv_minus_momentum_density(k, sigma_minus: float):
    """|psi~_-(k)|^2 for the unitary Fourier convention exp(-i k x) / sqrt(2 pi)."""
    u2 = (np.asarray(k, dtype=np.float64) * sigma_minus) ** 2
    return (1.0 + 2.0 * u2) ** 2 * np.exp(-2.0 * u2) * sigma_minus / (2.75 * math.sqrt(math.pi / 2.0))


def gaussian_amplitude(x, sigma: float):
    x = np.asarray(x, dtype=np.float64)
    return (2.0 * math.pi * sigma * sigma) ** -0.25 * np.exp(-x * x / (4.0 * sigma * sigma))


def gaussian_momentum_density(k, sigma: float):
    k = np.asarray(k, dtype=np.float64)
    return sigma * math.sqrt(2.0 / math.pi) * np.exp(-2.0 * sigma * sigma * k * k)


# --- generic transform ----------------------------------------------------------


def wigner_transform_1d(
    psi,
    x,
    k,
    *,
    reach: float,
    step: float,
    decay_tol: float = 1e-13,
    residue_tol: float = 1e-9,
):
    """W(x, k) = (1/2 pi) int dy exp(-i k y) psi(x + y/2) psi*(x - y/2).

    The y integral runs over ``[-reach, reach]`` by the trapezoid rule, which
    converges spectrally for smooth decaying integrands. Returns an array of
    shape ``(len(x), len(k))`` (scalars for scalar input).

    Raises ``ValueError`` if the integrand has not decayed to ``decay_tol`` of
    its peak at the window edge or if the result has an imaginary residue.
    """
    scalar = np.ndim(x) == 0 and np.ndim(k) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ks = np.atleast_1d(np.asarray(k, dtype=np.float64))
    if not (reach > 0 and step > 0):
        raise ValueError("reach and step must be positive")
    n = int(math.ceil(reach / step))
    y = step * np.arange(-n, n + 1)
    plus = np.asarray(psi(xs[:, None] + 0.5 * y[None, :]), dtype=np.complex128)
    minus = np.asarray(psi(xs[:, None] - 0.5 * y[None, :]), dtype=np.complex128)
    integrand = plus * np.conj(minus)
    peak = np.abs(integrand).max()
    if peak == 0:
        raise ValueError("amplitude vanishes on the whole window")
    edge = max(np.abs(integrand[:, :2]).max(), np.abs(integrand[:, -2:]).max())
    if edge > decay_tol * peak:
        raise ValueError(f"integrand has not decayed at the window edge ({edge / peak:.3g} of peak); widen reach")
    phase = np.exp(-1j * np.outer(y, ks))
    w = step * (integrand @ phase) / (2.0 * math.pi)
    if np.abs(w.imag).max() > residue_tol * max(np.abs(w.real).max(), 1e-300):
        raise ValueError(f"transform has imaginary residue {np.abs(w.imag).max():.3g}")
    w = w.real
    return float(w[0, 0]) if scalar else w


# --- two-particle product ------------------------------------------------------


def _separable_source(state):
    if isinstance(state, BandedModalState):
        state = state.source
    if isinstance(state, (BvParams, DoubleGaussian)):
        return state
    raise TypeError(f"{type(state).__name__} is not a +- separable state with a closed-form Wigner function")


def factor_wigner(state, part: str, x, k, *, printed: bool = False):
    """W_+ or W_- of a separable state."""
    src = _separable_source(state)
    if part == "plus":
        return wigner_plus(x, k, src.sigma_plus, printed=printed)
    if part == "minus":
        if isinstance(src, BvParams):
            return wigner_minus(x, k, src.sigma_minus, printed=printed)
        return gaussian_wigner(x, k, src.sigma_minus)
    raise ValueError(f"part must be 'plus' or 'minus', got {part!r}")


def wigner_product_4d(state, x1, x2, k1, k2, *, printed: bool = False):
    """W(x1, x2, k1, k2) = W_+(x_+, k_+) W_-(x_-, k_-)."""
    x1, x2, k1, k2 = (np.asarray(v, dtype=np.float64) for v in (x1, x2, k1, k2))
    xp, xm = (x1 + x2) / _SQRT2, (x1 - x2) / _SQRT2
    kp, km = (k1 + k2) / _SQRT2, (k1 - k2) / _SQRT2
    return factor_wigner(state, "plus", xp, kp, printed=printed) * factor_wigner(
        state, "minus", xm, km, printed=printed
    )


def factor_amplitude(state, part: str):
    """The 1D amplitude psi_+ or psi_- as a callable."""
    src = _separable_source(state)
    if part == "plus":
        return lambda x: gaussian_amplitude(x, src.sigma_plus)
    if isinstance(src, BvParams):
        return lambda x: bv_minus_amplitude(x, src.sigma_minus)
    return lambda x: gaussian_amplitude(x, src.sigma_minus)


def factor_momentum_density(state, part: str):
    src = _separable_source(state)
    if part == "plus":
        return lambda k: gaussian_momentum_density(k, src.sigma_plus)
    if isinstance(src, BvParams):
        return lambda k: bv_minus_momentum_density(k, src.sigma_minus)
    return lambda k: gaussian_momentum_density(k, src.sigma_minus)


# --- grids and the screen -------------------------------------------------------


@dataclass(frozen=True)
class WignerGrid:
    x_axis: Axis
    k_axis: Axis
    values: np.ndarray
    label: str = ""

    @property
    def x(self) -> np.ndarray:
        return self.x_axis.values()

    @property
    def k(self) -> np.ndarray:
        return self.k_axis.values()

    @property
    def min_value(self) -> float:
        return float(self.values.flat[self._argmin])

    @property
    def min_location(self) -> tuple:
        i, j = np.unravel_index(self._argmin, self.values.shape)
        return float(self.x[i]), float(self.k[j])

    @property
    def _argmin(self) -> int:
        # argmin returns the first (lowest flat index) minimum
        return int(np.argmin(self.values))

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.k, axis=1), self.x))

    def to_csv(self, stream=None, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "k", "W"])
        for i, xv in enumerate(self.x):
            for j, kv in enumerate(self.k):
                writer.writerow([repr(float(xv)), repr(float(kv)), repr(float(self.values[i, j]))])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


class LhvKind(str, enum.Enum):
    ADMISSIBLE = "LhvAdmissible"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class LhvVerdict:
    kind: LhvKind
    negativity_fraction: float
    min_value: float


def default_axes(state, part: str, *, span: float = 6.0, points: int = 201):
    """+-span standard deviations in x and in k (momentum sd is 1/(2 sigma))."""
    src = _separable_source(state)
    sigma = src.sigma_plus if part == "plus" else src.sigma_minus
    return Axis.centered(span * sigma, points), Axis.centered(span / (2.0 * sigma), points)


def negativity_scan(
    state,
    x_axis: Axis | None = None,
    k_axis: Axis | None = None,
    *,
    part: str = "minus",
    printed: bool = False,
    positivity_tol: float = POSITIVITY_TOL,
):
    """Tabulate one Wigner factor and screen it for negativity.

    The verdict is LhvAdmissible only if no sample falls below
    ``-positivity_tol`` times the grid maximum; otherwise Inconclusive.
    """
    dx, dk = default_axes(state, part)
    x_axis = x_axis or dx
    k_axis = k_axis or dk
    X, K = np.meshgrid(x_axis.values(), k_axis.values(), indexing="ij")
    values = np.asarray(factor_wigner(state, part, X, K, printed=printed), dtype=np.float64)
    grid = WignerGrid(x_axis, k_axis, values, label=part)
    floor = -positivity_tol * float(np.abs(values).max())
    negative = values < floor
    kind = LhvKind.INCONCLUSIVE if negative.any() else LhvKind.ADMISSIBLE
    return grid, LhvVerdict(kind, float(negative.mean()), grid.min_value)
