"""Hermite-Gaussian modes, half-line overlaps and quadrature helpers.

Mode convention: ``phi_n(x; sigma0)`` is orthonormal on the real line and
``|phi_0|^2`` is a Gaussian with standard deviation ``sigma0``::

    phi_n(x) = (2 pi sigma0^2)^(-1/4) (2^n n!)^(-1/2) H_n(u) exp(-u^2 / 2),
    u = x / (sigma0 sqrt 2)

All lengths are in millimetres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from ._backend import kernels


class QuadratureError(RuntimeError):
    """Requested accuracy could not be reached at working precision."""


class RecurrenceError(RuntimeError):
    """Recurrence result disagrees with its quadrature spot check."""


@dataclass(frozen=True)
class HermiteBasisSpec:
    sigma0: float
    n_max: int

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")

    @property
    def size(self) -> int:
        return self.n_max + 1

    @property
    def unit(self) -> float:
        """Length corresponding to one unit of the Hermite argument."""
        return self.sigma0 * math.sqrt(2.0)


@dataclass(frozen=True)
class ErrorBudget:
    """Absolute error targets on probabilities.

    ``truncation_tol`` bounds the probability error caused by basis
    truncation. A tail mass ``tau`` perturbs any normalized expectation of a
    norm-one observable by at most ``2 (sqrt(tau) + tau)``, so the admissible
    tail mass is the largest ``tau`` meeting that bound.
    """

    abs_tol: float = 1e-8
    quadrature_tol: float = 1e-11
    truncation_tol: float = 2e-9

    def __post_init__(self):
        for name in ("abs_tol", "quadrature_tol", "truncation_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.quadrature_tol + self.truncation_tol > self.abs_tol:
            raise ValueError("quadrature_tol + truncation_tol must not exceed abs_tol")

    @property
    def tail_mass_limit(self) -> float:
        # solve 2 (r + r^2) = truncation_tol for r = sqrt(tau)
        r = (-1.0 + math.sqrt(1.0 + 2.0 * self.truncation_tol)) / 2.0
        return r * r


def truncation_error(tail_mass: float) -> float:
    """Bound on |<O>_exact - <O>_truncated| for ||O|| <= 1."""
    r = math.sqrt(max(tail_mass, 0.0))
    return 2.0 * (r + r * r)


def hermite_eval(n: int, u: float) -> float:
    """Physicists' Hermite polynomial H_n(u) by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    u = float(u)
    prev, cur = 0.0, 1.0
    for j in range(n):
        prev, cur = cur, 2.0 * u * cur - 2.0 * j * prev
        if not math.isfinite(cur):
            raise OverflowError(f"H_{n}({u}) overflows double precision (at degree {j + 1})")
    return cur


def hermite_exact(n: int, u) -> Fraction:
    """H_n(u) in rational arithmetic, from the explicit sum."""
    u = Fraction(u)
    total = Fraction(0)
    for m in range(n // 2 + 1):
        term = Fraction((-1) ** m * math.factorial(n), math.factorial(m) * math.factorial(n - 2 * m))
        total += term * (2 * u) ** (n - 2 * m)
    return total


def mode_table(spec: HermiteBasisSpec, x, n_max: int | None = None) -> np.ndarray:
    """Values phi_n(x_j) for n = 0..n_max; shape ``(n_max + 1, len(x))``."""
    n_max = spec.n_max if n_max is None else n_max
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    table = kernels.hermite_functions(x / spec.unit, n_max)
    return table / math.sqrt(spec.unit)


def mode_eval(spec: HermiteBasisSpec, n: int, x):
    if not 0 <= n <= spec.n_max:
        raise ValueError(f"mode index {n} outside 0..{spec.n_max}")
    scalar = np.ndim(x) == 0
    vals = mode_table(spec, x, n)[n]
    return float(vals[0]) if scalar else vals


def _reduced_threshold(spec: HermiteBasisSpec, a: float) -> float:
    if math.isinf(a):
        return math.copysign(60.0 + 2.0 * math.sqrt(2 * spec.n_max + 1), a)
    return a / spec.unit


def halfline_overlap(spec: HermiteBasisSpec, n: int, m: int, a: float) -> float:
    """int_a^inf phi_n(x) phi_m(x) dx (closed form, symmetric in n, m)."""
    for idx in (n, m):
        if not 0 <= idx <= spec.n_max:
            raise ValueError(f"mode index {idx} outside 0..{spec.n_max}")
    top = max(n, m)
    mat = kernels.halfline_overlaps(_reduced_threshold(spec, a), top)
    return float(mat[n, m])


def overlap_matrix(
    spec: HermiteBasisSpec,
    a: float,
    *,
    spot_checks: int = 3,
    check_tol: float = 1e-10,
) -> np.ndarray:
    """Real symmetric matrix R[n, m] = int_a^inf phi_n phi_m dx.

    A handful of entries are re-derived by adaptive quadrature; a mismatch
    beyond ``check_tol`` raises :class:`RecurrenceError`.
    """
    mat = kernels.halfline_overlaps(_reduced_threshold(spec, a), spec.n_max)
    if not np.all(np.isfinite(mat)):
        raise RecurrenceError(f"non-finite overlap entries at a={a}")
    if spot_checks and math.isfinite(a):
        for n, m in _spot_check_indices(spec.n_max, spot_checks):
            ref, _ = adaptive_halfline_overlap(spec, n, m, a, tol=check_tol / 10)
            if abs(ref - mat[n, m]) > check_tol:
                raise RecurrenceError(
                    f"overlap ({n},{m}) at a={a}: recurrence {mat[n, m]!r} vs quadrature {ref!r}"
                )
    return mat


def _spot_check_indices(n_max: int, count: int):
    picks = [(0, 0), (1, min(2, n_max)), (min(7, n_max), min(4, n_max)), (min(16, n_max), min(13, n_max))]
    return picks[:count]


def complement_matrix(spec: HermiteBasisSpec, a: float) -> np.ndarray:
    """int_{-inf}^a phi_n phi_m dx, via parity from the overlap at -a."""
    par = 1.0 - 2.0 * (np.arange(spec.size) % 2)
    mat = kernels.halfline_overlaps(_reduced_threshold(spec, -a), spec.n_max)
    return mat * np.outer(par, par)


def gauss_hermite_nodes(spec: HermiteBasisSpec, order: int):
    """Nodes and weights integrating ``phi_n phi_m`` exactly for n + m < 2 order."""
    u, w = np.polynomial.hermite.hermgauss(order)
    # int f(x) dx = unit * sum w_i exp(u_i^2) f(unit u_i)
    return spec.unit * u, spec.unit * w * np.exp(u * u)


def gram_matrix(spec: HermiteBasisSpec, order: int | None = None) -> np.ndarray:
    """Inner products <phi_n, phi_m> under Gauss-Hermite quadrature."""
    order = spec.n_max + 2 if order is None else order
    x, w = gauss_hermite_nodes(spec, order)
    table = mode_table(spec, x)
    return (table * w) @ table.T


def adaptive_quad(func, lo: float, hi: float, tol: float, *, limit: int = 2000, points=None):
    """Adaptive Gauss-Kronrod integral with an error estimate.

    Raises :class:`QuadratureError` when the estimate exceeds ``tol``.
    """
    kw = {}
    if points is not None and math.isfinite(lo) and math.isfinite(hi):
        kw["points"] = points
    val, err, info = integrate.quad(
        func, lo, hi, epsabs=tol, epsrel=0.0, limit=limit, full_output=True, **kw
    )[:3]
    if err > tol or not math.isfinite(val):
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}")
    return val, err


def adaptive_halfline_overlap(spec: HermiteBasisSpec, n: int, m: int, a: float, tol: float = 1e-12):
    """Independent adaptive-quadrature value of int_a^inf phi_n phi_m dx."""
    # integrand is negligible beyond the outer turning point plus a margin
    edge = spec.unit * (math.sqrt(2 * max(n, m) + 1) + 12.0)
    lo = max(a, -edge)
    if lo >= edge:
        return 0.0, 0.0
    hi = edge
    pieces = max(1, int(math.sqrt(2 * max(n, m) + 1)))
    breaks = np.linspace(lo, hi, pieces + 1)
    total = 0.0
    err = 0.0
    for left, right in zip(breaks[:-1], breaks[1:]):
        val, e = adaptive_quad(
            lambda x: mode_eval(spec, n, x) * mode_eval(spec, m, x),
            float(left),
            float(right),
            tol / pieces,
        )
        total += val
        err += e
    return total, err
