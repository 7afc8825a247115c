"""Sign-binned joint statistics and the CHSH functional.

Outcomes are +1 for x > dx and -1 for x <= dx at each detector, with each
photon propagated to its own distance. Probabilities are evaluated as
banded bilinear forms of the modal coefficient matrix against the real
half-line overlap matrices; the Gouy phases are folded into the
coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .numerics import ErrorBudget, truncation_error
from .propagation import (
    CompletenessError,
    OpticalConfig,
    OverlapCache,
    completeness_residual,
    fresnel_oracle,
    make_propagated_basis,
    sign_projector_overlaps,
)
from .states import BandedModalState

TSIRELSON = 2.0 * math.sqrt(2.0)


class ProbabilityError(RuntimeError):
    """A probability came out complex or negative beyond rounding."""


@dataclass(frozen=True)
class QuadrantProbs:
    p_pp: float
    p_pm: float
    p_mp: float
    p_mm: float
    z1: float
    z2: float
    dx1: float = 0.0
    dx2: float = 0.0
    error_estimate: float = 0.0

    @property
    def total(self) -> float:
        return self.p_pp + self.p_pm + self.p_mp + self.p_mm


@dataclass(frozen=True)
class ChshSettings:
    za: float
    za_prime: float
    zb: float
    zb_prime: float
    dx1: float = 0.0
    dx2: float = 0.0

    def __post_init__(self):
        for name in ("za", "za_prime", "zb", "zb_prime", "dx1", "dx2"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)

    def pairs(self):
        """Distance pairs for E(a,b), E(a,b'), E(a',b), E(a',b')."""
        return (
            (self.za, self.zb),
            (self.za, self.zb_prime),
            (self.za_prime, self.zb),
            (self.za_prime, self.zb_prime),
        )

    def as_dict(self) -> dict:
        return {
            "za_mm": self.za,
            "za_prime_mm": self.za_prime,
            "zb_mm": self.zb,
            "zb_prime_mm": self.zb_prime,
            "dx1_mm": self.dx1,
            "dx2_mm": self.dx2,
        }


@dataclass(frozen=True)
class ChshResult:
    correlations: tuple
    s_minus: float
    s_plus: float
    settings: ChshSettings
    err_bound: float = 0.0

    @property
    def s_max(self) -> float:
        return max(self.s_minus, self.s_plus)

    @property
    def branch(self) -> str:
        return "minus" if self.s_minus >= self.s_plus else "plus"


def correlation(q: QuadrantProbs) -> float:
    return q.p_pp + q.p_mm - q.p_pm - q.p_mp


def chsh_branches(e_ab: float, e_abp: float, e_apb: float, e_apbp: float):
    """Both sides of |E(a,b) - E(a,b')| -+ (E(a',b) + E(a',b'))."""
    head = abs(e_ab - e_abp)
    tail = e_apb + e_apbp
    return head - tail, head + tail


def _phased_bands(state: BandedModalState, gouy1: float, gouy2: float) -> np.ndarray:
    n = np.arange(state.size)
    row = np.exp(-1j * gouy1 * n)
    out = np.empty_like(state.bands)
    for j, o in enumerate(state.offsets):
        col = np.zeros(state.size, dtype=np.complex128)
        lo, hi = max(0, -o), min(state.size, state.size - o)
        col[lo:hi] = np.exp(-1j * gouy2 * (n[lo:hi] + o))
        out[j] = state.bands[j] * row * col
    return out


@dataclass
class ChshEngine:
    """Evaluates quadrant probabilities for one state, reusing overlap matrices."""

    state: BandedModalState
    optics: OpticalConfig = field(default_factory=OpticalConfig)
    residue_tol: float = 1e-12
    cache: OverlapCache = field(default_factory=lambda: OverlapCache(maxsize=64))

    def quadrant_probabilities(self, z1: float, z2: float, dx1: float = 0.0, dx2: float = 0.0) -> QuadrantProbs:
        spec = self.state.basis
        b1 = make_propagated_basis(spec, self.optics, z1)
        b2 = make_propagated_basis(spec, self.optics, z2)
        r1 = {s: sign_projector_overlaps(b1, dx1, s, self.cache) for s in "+-"}
        r2 = {s: sign_projector_overlaps(b2, dx2, s, self.cache) for s in "+-"}
        resid = completeness_residual(r1["+"], r1["-"]) + completeness_residual(r2["+"], r2["-"])
        if resid > 1e-11:
            raise CompletenessError(f"projector completeness residual {resid:.3g} at z=({z1}, {z2})")
        bands = _phased_bands(self.state, b1.gouy, b2.gouy)
        offsets = self.state.offsets
        probs = {}
        for s1 in "+-":
            for s2 in "+-":
                val = kernels.banded_bilinear(bands, offsets, r1[s1], r2[s2])
                if abs(val.imag) > self.residue_tol:
                    raise ProbabilityError(f"P({s1}{s2}) has imaginary residue {val.imag:.3g}")
                if val.real < -self.residue_tol:
                    raise ProbabilityError(f"P({s1}{s2}) = {val.real:.3g} is negative")
                probs[s1 + s2] = val.real
        return QuadrantProbs(
            probs["++"], probs["+-"], probs["-+"], probs["--"],
            float(z1), float(z2), float(dx1), float(dx2), self._truncation + self._quadrature(resid),
        )

    @property
    def _truncation(self) -> float:
        return truncation_error(self.state.tail_mass)

    def _quadrature(self, resid: float) -> float:
        # entry-wise overlap error feeds a Frobenius bound on each form
        return self.state.size * (resid + 4.0 * np.finfo(float).eps)

    def correlation_with_error(self, z1: float, z2: float, dx1: float = 0.0, dx2: float = 0.0):
        """E and its bound: truncation enters once (norm-one observable), quadrature once per quadrant."""
        q = self.quadrant_probabilities(z1, z2, dx1, dx2)
        quad = q.error_estimate - self._truncation
        return correlation(q), self._truncation + 4.0 * quad

    def correlation(self, z1: float, z2: float, dx1: float = 0.0, dx2: float = 0.0) -> float:
        return self.correlation_with_error(z1, z2, dx1, dx2)[0]

    def chsh(self, settings: ChshSettings) -> ChshResult:
        es, errs = zip(
            *(self.correlation_with_error(z1, z2, settings.dx1, settings.dx2) for z1, z2 in settings.pairs())
        )
        s_minus, s_plus = chsh_branches(*es)
        return ChshResult(tuple(es), s_minus, s_plus, settings, float(sum(errs)))


def quadrant_probabilities(
    state: BandedModalState,
    z1: float,
    z2: float,
    dx1: float = 0.0,
    dx2: float = 0.0,
    optics: OpticalConfig | None = None,
) -> QuadrantProbs:
    return ChshEngine(state, optics or OpticalConfig()).quadrant_probabilities(z1, z2, dx1, dx2)


def chsh_value(state: BandedModalState, settings: ChshSettings, optics: OpticalConfig | None = None) -> ChshResult:
    return ChshEngine(state, optics or OpticalConfig()).chsh(settings)


def _gauss_legendre_panels(lo: float, hi: float, panels: int, order: int = 16):
    u, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * u[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def oracle_quadrant_probabilities(
    psi,
    z1: float,
    z2: float,
    dx1: float = 0.0,
    dx2: float = 0.0,
    optics: OpticalConfig | None = None,
    *,
    half_width: float,
    step: float,
    out_half_width: float | None = None,
    rank_tol: float = 1e-7,
    panels: int = 64,
) -> QuadrantProbs:
    """Brute-force quadrant probabilities, independent of the modal machinery.

    ``psi(x1, x2)`` is sampled on a uniform grid, split into a low-rank sum of
    products by SVD, each factor is carried to its detector with the direct
    Fresnel integral, and the four quadrants are integrated with composite
    Gauss-Legendre rules on either side of each threshold.
    """
    optics = optics or OpticalConfig()
    x = np.arange(-half_width, half_width + 0.5 * step, step)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    grid = psi(X1, X2) * step
    u, sv, vh = np.linalg.svd(grid)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    sv = sv[:rank]
    # factors carry sqrt of their singular value so relative weights survive
    u = u[:, :rank] * np.sqrt(sv / step)
    v = vh[:rank].T * np.sqrt(sv / step)
    out_hw = out_half_width or half_width

    def halves(factors, z, dx):
        mats = []
        for lo, hi in ((dx, out_hw), (-out_hw, dx)):
            nodes, weights = _gauss_legendre_panels(lo, hi, panels)
            prop = _propagate(x, factors, optics, z, nodes)
            mats.append((np.conj(prop) * weights[:, None]).T @ prop)
        return mats

    a_plus, a_minus = halves(u, z1, dx1)
    b_plus, b_minus = halves(v, z2, dx2)
    norm = float(np.sum(sv * sv))

    def quad(a, b):
        return float(np.real(np.sum(a * b))) / norm

    return QuadrantProbs(
        quad(a_plus, b_plus), quad(a_plus, b_minus), quad(a_minus, b_plus), quad(a_minus, b_minus),
        float(z1), float(z2), float(dx1), float(dx2), 0.0,
    )


def _propagate(x, field_, optics, z, nodes):
    if z == 0:
        # trapezoid-sampled factor, evaluated off-grid by band-limited (sinc) interpolation
        h = x[1] - x[0]
        return np.sinc((nodes[:, None] - x[None, :]) / h) @ field_
    return fresnel_oracle(x, field_, optics, z, nodes)
