"""Two-photon transverse states and their banded Hermite-Gaussian form.

Every state handled here has the shape::

    psi(x1, x2) = N * P(x1, x2) * exp(-x_+^2 / (4 s_+^2)) * exp(-x_-^2 / (4 s_-^2))

with ``x_+- = (x1 +- x2) / sqrt(2)`` and ``P`` a polynomial. The Gaussian
part has an exact diagonal Schmidt expansion in a shared-waist basis; ``P``
is applied with position ladder operators, which keeps the coefficient
matrix banded with half-width ``deg P``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .numerics import ErrorBudget, HermiteBasisSpec, mode_table

DEFAULT_N_MAX = 1024


class TruncationError(RuntimeError):
    """The basis is too small to certify the requested tail mass."""

    def __init__(self, message: str, required_n_max: int):
        super().__init__(message)
        self.required_n_max = required_n_max


@dataclass(frozen=True)
class BvParams:
    """Bell's state: N ((x1 - x2)^2 - 8 s_-^2) times the double Gaussian."""

    sigma_plus: float
    sigma_minus: float

    def __post_init__(self):
        if not 0 < self.sigma_minus < self.sigma_plus:
            raise ValueError("need 0 < sigma_minus < sigma_plus")

    @property
    def norm(self) -> float:
        # int |psi|^2 = N^2 * 88 pi s_+ s_-^5
        return 1.0 / math.sqrt(88.0 * math.pi * self.sigma_plus * self.sigma_minus**5)

    def poly_coeffs(self) -> np.ndarray:
        c = np.zeros((3, 3))
        c[2, 0] = 1.0
        c[1, 1] = -2.0
        c[0, 2] = 1.0
        c[0, 0] = -8.0 * self.sigma_minus**2
        return c


@dataclass(frozen=True)
class DoubleGaussian:
    sigma_plus: float
    sigma_minus: float

    def __post_init__(self):
        if not 0 < self.sigma_minus <= self.sigma_plus:
            raise ValueError("need 0 < sigma_minus <= sigma_plus")

    @property
    def norm(self) -> float:
        return 1.0 / math.sqrt(2.0 * math.pi * self.sigma_plus * self.sigma_minus)

    def poly_coeffs(self) -> np.ndarray:
        return np.ones((1, 1))


@dataclass(frozen=True)
class PolyGaussianSpec:
    """``poly_coeffs[i, j]`` multiplies ``x1**i * x2**j`` (lengths in mm)."""

    poly_coeffs: np.ndarray
    sigma_plus: float
    sigma_minus: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.poly_coeffs, dtype=np.float64))
        if c.ndim != 2 or not np.any(c):
            raise ValueError("poly_coeffs must be a non-zero 2D array")
        c.setflags(write=False)
        object.__setattr__(self, "poly_coeffs", c)
        if not 0 < self.sigma_minus <= self.sigma_plus:
            raise ValueError("need 0 < sigma_minus <= sigma_plus")

    @property
    def degree(self) -> int:
        idx = np.argwhere(self.poly_coeffs != 0)
        return int((idx[:, 0] + idx[:, 1]).max())


def _coeffs(spec) -> np.ndarray:
    if isinstance(spec, PolyGaussianSpec):
        return spec.poly_coeffs
    return spec.poly_coeffs()


def _degree(coeffs: np.ndarray) -> int:
    idx = np.argwhere(coeffs != 0)
    return int((idx[:, 0] + idx[:, 1]).max())


def _poly_eval(coeffs: np.ndarray, x1, x2):
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    total = np.zeros(np.broadcast(x1, x2).shape)
    for i in range(coeffs.shape[0] - 1, -1, -1):
        row = np.zeros_like(total)
        for j in range(coeffs.shape[1] - 1, -1, -1):
            row = row * x2 + coeffs[i, j]
        total = total * x1 + row
    return total


def bv_wavefunction(params: BvParams):
    """Normalized Bell wavefunction as a vectorized callable ``psi(x1, x2)``."""
    n = params.norm
    sp, sm = params.sigma_plus, params.sigma_minus

    def psi(x1, x2):
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        d = x1 - x2
        s = x1 + x2
        return n * (d * d - 8.0 * sm * sm) * np.exp(-s * s / (8.0 * sp * sp) - d * d / (8.0 * sm * sm))

    return psi


def poly_gaussian_wavefunction(spec):
    """Closed-form amplitude for any state in this module, normalized numerically."""
    if isinstance(spec, BvParams):
        return bv_wavefunction(spec)
    coeffs = _coeffs(spec)
    sp, sm = spec.sigma_plus, spec.sigma_minus

    def raw(x1, x2):
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        s = x1 + x2
        d = x1 - x2
        return _poly_eval(coeffs, x1, x2) * np.exp(-s * s / (8.0 * sp * sp) - d * d / (8.0 * sm * sm))

    norm = 1.0 / math.sqrt(_poly_gaussian_norm2(coeffs, sp, sm))

    def psi(x1, x2):
        return norm * raw(x1, x2)

    return psi


def _poly_gaussian_norm2(coeffs, sp, sm, order: int = 40) -> float:
    """Exact L2 norm^2 by tensor Gauss-Hermite quadrature in +- coordinates."""
    deg = _degree(coeffs)
    order = max(order, deg + 2)
    u, w = np.polynomial.hermite.hermgauss(order)
    # |psi|^2 has weight exp(-x_+^2/(2 s_+^2)): x_+ = s_+ sqrt(2) u
    xp = sp * math.sqrt(2.0) * u
    xm = sm * math.sqrt(2.0) * u
    XP, XM = np.meshgrid(xp, xm, indexing="ij")
    x1 = (XP + XM) / math.sqrt(2.0)
    x2 = (XP - XM) / math.sqrt(2.0)
    vals = _poly_eval(coeffs, x1, x2) ** 2
    return float(np.einsum("i,j,ij->", w, w, vals) * 2.0 * sp * sm)


def minus_mode_coefficients(params: BvParams) -> np.ndarray:
    """Expansion of the x_- factor of Bell's state over phi_n(x_-; s_-).

    The factor is (x_-^2 - 4 s_-^2) exp(-x_-^2 / (4 s_-^2)); the result is
    normalized and exact up to rounding: (-3, 0, sqrt 2) / sqrt 11.
    """
    return polynomial_mode_coefficients([-4.0 * params.sigma_minus**2, 0.0, 1.0], params.sigma_minus)


def polynomial_mode_coefficients(poly, sigma) -> np.ndarray:
    """Normalized coefficients of p(x) phi_0(x; sigma) over phi_n(x; sigma).

    ``poly[i]`` multiplies ``x**i``. Uses x phi_n = sigma (sqrt(n+1) phi_{n+1}
    + sqrt(n) phi_{n-1}), evaluated by Horner's rule.
    """
    poly = list(poly)
    deg = len(poly) - 1
    vec = np.zeros(deg + 1)
    for c in reversed(poly):
        shifted = np.zeros(deg + 1)
        n = np.arange(deg + 1)
        shifted[1:] += sigma * np.sqrt(n[1:]) * vec[:-1]
        shifted[:-1] += sigma * np.sqrt(n[1:]) * vec[1:]
        vec = shifted
        vec[0] += c
    return vec / np.linalg.norm(vec)


def double_gaussian_schmidt(sigma_plus: float, sigma_minus: float, n_max: int, tail_tol: float | None = None):
    """Diagonal Schmidt form of the normalized double Gaussian.

    Returns ``(sigma0, s)`` with ``sigma0 = sqrt(s_+ s_-)`` and
    ``s_n = sqrt(1 - mu) mu^(n/2)``, ``mu = ((s_+ - s_-)/(s_+ + s_-))^2``,
    for n = 0..n_max. The neglected mass is ``mu^(n_max + 1)``.
    """
    if not 0 < sigma_minus <= sigma_plus:
        raise ValueError("need 0 < sigma_minus <= sigma_plus")
    sigma0 = math.sqrt(sigma_plus * sigma_minus)
    t = (sigma_plus - sigma_minus) / (sigma_plus + sigma_minus)
    mu = t * t
    n = np.arange(n_max + 1)
    if mu == 0.0:
        s = np.zeros(n_max + 1)
        s[0] = 1.0
        return sigma0, s
    s = math.sqrt(1.0 - mu) * t**n
    if tail_tol is not None:
        tail = mu ** (n_max + 1)
        if tail > tail_tol:
            need = math.ceil(math.log(tail_tol) / math.log(mu)) - 1
            raise TruncationError(
                f"double-Gaussian tail mass {tail:.3g} exceeds {tail_tol:.3g} at n_max={n_max}; "
                f"need n_max >= {need}",
                need,
            )
    return sigma0, s


def schmidt_mu(sigma_plus: float, sigma_minus: float) -> float:
    t = (sigma_plus - sigma_minus) / (sigma_plus + sigma_minus)
    return t * t


@dataclass(frozen=True, eq=False)
class BandedModalState:
    """C[n, m] over phi_n(x1; sigma0) phi_m(x2; sigma0), stored by diagonals.

    ``bands[j, n] = C[n, n + offsets[j]]`` (zero where out of range). Only
    diagonals with non-zero entries are kept.
    """

    basis: HermiteBasisSpec
    offsets: np.ndarray
    bands: np.ndarray
    tail_mass: float
    norm_residual: float
    source: object = field(default=None, repr=False)

    def __post_init__(self):
        self.offsets.setflags(write=False)
        self.bands.setflags(write=False)

    @property
    def bandwidth(self) -> int:
        return int(np.abs(self.offsets).max())

    @property
    def size(self) -> int:
        return self.basis.size

    def dense(self) -> np.ndarray:
        return bands_to_dense(self.bands, self.offsets)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.bands) ** 2))

    def truncation_error(self) -> float:
        from .numerics import truncation_error

        return truncation_error(self.tail_mass)

    def amplitude(self, x1, x2) -> np.ndarray:
        """Reconstruct psi at paired points (x1[i], x2[i])."""
        x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
        x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
        t1 = mode_table(self.basis, x1)
        t2 = mode_table(self.basis, x2)
        total = np.zeros(x1.shape, dtype=np.complex128)
        size = self.size
        for j, o in enumerate(self.offsets):
            lo, hi = max(0, -o), min(size, size - o)
            total += np.einsum("n,ni,ni->i", self.bands[j, lo:hi], t1[lo:hi], t2[lo + o:hi + o])
        return total


def dense_to_bands(mat: np.ndarray, max_offset: int):
    size = mat.shape[0]
    offsets = []
    rows = []
    for o in range(-max_offset, max_offset + 1):
        band = np.zeros(size, dtype=np.complex128)
        diag = np.diagonal(mat, o)
        if o >= 0:
            band[: size - o] = diag
        else:
            band[-o:] = diag
        if np.any(band != 0):
            offsets.append(o)
            rows.append(band)
    return np.array(offsets, dtype=np.int64), np.array(rows)


def bands_to_dense(bands: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    size = bands.shape[1]
    mat = np.zeros((size, size), dtype=bands.dtype)
    for j, o in enumerate(offsets):
        lo, hi = max(0, -o), min(size, size - o)
        idx = np.arange(lo, hi)
        mat[idx, idx + o] = bands[j, lo:hi]
    return mat


def _position_operator(sigma0: float, size: int):
    off = sigma0 * np.sqrt(np.arange(1, size))
    return sparse.diags([off, off], [-1, 1], shape=(size, size), format="csr")


def to_banded_modal(
    spec,
    n_max: int = DEFAULT_N_MAX,
    budget: ErrorBudget | None = None,
    *,
    pad: int = 48,
) -> BandedModalState:
    """Banded modal form of a BvParams / DoubleGaussian / PolyGaussianSpec.

    The polynomial is applied in a basis extended by ``deg + pad`` modes so the
    truncated block is exact; the mass falling outside ``0..n_max`` is the tail
    certificate, with a geometric estimate for what lies beyond the extension.
    """
    budget = budget or ErrorBudget()
    coeffs = _coeffs(spec)
    deg = _degree(coeffs)
    sp, sm = spec.sigma_plus, spec.sigma_minus
    ext = n_max + deg + pad
    sigma0, s = double_gaussian_schmidt(sp, sm, ext)
    mu = schmidt_mu(sp, sm)
    size = ext + 1
    X = _position_operator(sigma0, size)
    S = sparse.diags(s, 0, format="csr")

    # sum_ij c_ij X^i S X^j, Horner in both indices
    result = sparse.csr_matrix((size, size))
    for i in range(coeffs.shape[0] - 1, -1, -1):
        inner = sparse.csr_matrix((size, size))
        for j in range(coeffs.shape[1] - 1, -1, -1):
            inner = inner @ X
            if coeffs[i, j] != 0:
                inner = inner + coeffs[i, j] * S
        result = X @ result + inner
    full = result.toarray()
    # X^i S X^j is only exact away from the extension edge; everything within
    # deg of the edge is discarded with the tail anyway.
    full[size - deg:, :] = 0.0
    full[:, size - deg:] = 0.0
    kept = full[: n_max + 1, : n_max + 1]
    kept_mass = float(np.sum(kept * kept))
    outside = full[n_max + 1:, :]
    side = full[: n_max + 1, n_max + 1:]
    dropped_raw = float(np.sum(outside * outside) + np.sum(side * side))
    dropped = dropped_raw / (kept_mass + dropped_raw)
    # mass beyond the extension: DG tail mass there, scaled by the measured
    # polynomial amplification of the dropped block (x2 safety)
    dg_beyond = mu ** (size - deg)
    dg_dropped = mu ** (n_max + 1) - dg_beyond
    amplification = dropped / dg_dropped if dg_dropped > 0 else 0.0
    tail = dropped + 2.0 * amplification * dg_beyond

    limit = budget.tail_mass_limit
    if tail > limit:
        need = _estimate_required_n_max(n_max, tail, limit, mu)
        raise TruncationError(
            f"tail mass {tail:.3g} exceeds certified limit {limit:.3g} at n_max={n_max}; "
            f"need n_max >= {need}",
            need,
        )
    scale = math.sqrt(kept_mass)
    kept = kept / scale
    if coeffs.shape[0] == coeffs.shape[1] and np.array_equal(coeffs, coeffs.T):
        # exchange-symmetric polynomial: remove rounding asymmetry from the Horner products
        kept = 0.5 * (kept + kept.T)
    offsets, bands = dense_to_bands(kept.astype(np.complex128), deg)
    norm_residual = abs(float(np.sum(np.abs(bands) ** 2)) - 1.0)
    return BandedModalState(
        basis=HermiteBasisSpec(sigma0, n_max),
        offsets=offsets,
        bands=bands,
        tail_mass=tail,
        norm_residual=norm_residual,
        source=spec,
    )


def _estimate_required_n_max(n_max, tail, limit, mu):
    if mu <= 0 or tail <= 0:
        return n_max + 1
    # tail ~ mu^n asymptotically; the polynomial prefactor only helps the estimate
    extra = math.log(limit / tail) / math.log(mu)
    return int(math.ceil(n_max + 1.1 * extra)) + 8


def auto_banded_modal(spec, budget: ErrorBudget | None = None, n_start: int = 64, n_cap: int = 8192):
    """Smallest certified modal form, growing n_max as the certificate demands."""
    budget = budget or ErrorBudget()
    n_max = n_start
    while True:
        try:
            return to_banded_modal(spec, n_max, budget)
        except TruncationError as exc:
            if exc.required_n_max > n_cap:
                raise
            n_max = max(exc.required_n_max, n_max + 16)
