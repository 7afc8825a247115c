"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` one to one and are used whenever the compiled
extension is unavailable (or when ``BELLCV_PURE_PYTHON=1``).
"""
import math

import numpy as np
from scipy.special import erfc

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)
_LOG_PI_QUARTER = 0.25 * math.log(math.pi)


def hermite_functions(u, nmax):
    """Orthonormal Hermite functions psi_n(u) for n = 0..nmax.

    Returns an array of shape ``(nmax + 1, len(u))``. The recurrence runs on a
    mantissa with a per-point log scale so that neither the Gaussian factor
    nor the polynomial growth under/overflows before the two meet.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty((nmax + 1, u.size))
    logscale = -0.5 * u * u - _LOG_PI_QUARTER
    prev = np.zeros_like(u)
    cur = np.ones_like(u)
    out[0] = np.exp(logscale)
    for n in range(nmax):
        nxt = math.sqrt(2.0 / (n + 1)) * u * cur - math.sqrt(n / (n + 1.0)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if big.any():
            cur[big] /= _RESCALE
            prev[big] /= _RESCALE
            logscale[big] += _LOG_RESCALE
        out[n + 1] = cur * np.exp(logscale)
    return out


def halfline_overlaps(b, nmax):
    """Matrix I[n, m] = int_b^inf psi_n(u) psi_m(u) du for n, m <= nmax.

    Off-diagonal entries use the Wronskian identity of the Hermite equation;
    the diagonal follows a ladder recurrence seeded with erfc(b)/2 and is
    accumulated with Neumaier compensation.
    """
    size = nmax + 1
    psi = hermite_functions(np.array([float(b)]), nmax + 1)[:, 0]
    n = np.arange(size + 1, dtype=np.float64)
    psi_prev = np.concatenate(([0.0], psi[:-1]))
    root = np.sqrt(2.0 * n)
    # I[n,m] = [sqrt(2m) psi_n psi_{m-1} - sqrt(2n) psi_{n-1} psi_m] / (2(m - n))
    num = np.outer(psi, psi_prev * root) - np.outer(psi_prev * root, psi)
    den = 2.0 * (n[None, :] - n[:, None])
    np.fill_diagonal(den, 1.0)
    full = num / den

    diag = np.empty(size)
    total = 0.5 * float(erfc(b))
    comp = 0.0
    diag[0] = total
    for j in range(1, size):
        step = math.sqrt(2.0 / j) * psi[j] * psi[j - 1] - math.sqrt((j + 1.0) / j) * full[j + 1, j - 1]
        if j >= 2:
            step += math.sqrt((j - 1.0) / j) * full[j, j - 2]
        t = total + step
        if abs(total) >= abs(step):
            comp += (total - t) + step
        else:
            comp += (step - t) + total
        total = t
        diag[j] = total + comp
    out = full[:size, :size].copy()
    np.fill_diagonal(out, diag)
    return out


def banded_bilinear(bands, offsets, left, right):
    """sum conj(C[p, q]) left[p, n] C[n, m] right[q, m] for band-stored C.

    ``bands[j, n]`` holds ``C[n, n + offsets[j]]``; ``left`` and ``right`` are
    real square matrices. Cost is O(N^2 * len(offsets)).
    """
    bands = np.asarray(bands, dtype=np.complex128)
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    size = left.shape[0]
    # work[q, n] = sum_j C[n, n + o_j] right[q, n + o_j]
    work = np.zeros((size, size), dtype=np.complex128)
    for j, o in enumerate(offsets):
        lo, hi = max(0, -o), min(size, size - o)
        work[:, lo:hi] += right[:, lo + o:hi + o] * bands[j, lo:hi]
    total = 0.0j
    for j, o in enumerate(offsets):
        lo, hi = max(0, -o), min(size, size - o)
        rows = np.einsum("ij,ij->i", left[lo:hi], work[lo + o:hi + o])
        total += np.dot(np.conj(bands[j, lo:hi]), rows)
    return complex(total)
