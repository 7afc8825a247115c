# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``."""
import numpy as np

from libc.math cimport sqrt, exp, log, erfc, fabs, M_PI

cdef double _RESCALE = 1e150


def hermite_functions(u, int nmax):
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t npts = uv.shape[0]
    out_arr = np.empty((nmax + 1, npts))
    cdef double[:, ::1] out = out_arr
    cdef double log_rescale = log(_RESCALE)
    cdef double lpq = 0.25 * log(M_PI)
    cdef Py_ssize_t j
    cdef int n
    cdef double x, prev, cur, nxt, ls
    with nogil:
        for j in range(npts):
            x = uv[j]
            ls = -0.5 * x * x - lpq
            prev = 0.0
            cur = 1.0
            out[0, j] = exp(ls)
            for n in range(nmax):
                nxt = sqrt(2.0 / (n + 1)) * x * cur - sqrt(n / (n + 1.0)) * prev
                prev = cur
                cur = nxt
                if fabs(cur) > _RESCALE:
                    cur /= _RESCALE
                    prev /= _RESCALE
                    ls += log_rescale
                out[n + 1, j] = cur * exp(ls)
    return out_arr


def halfline_overlaps(double b, int nmax):
    cdef Py_ssize_t size = nmax + 1
    cdef double[::1] psi = hermite_functions(np.array([b]), nmax + 1)[:, 0].copy()
    cdef double[::1] scaled_prev = np.zeros(size + 1)
    out_arr = np.empty((size, size))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n, m
    cdef double total, comp, step, t, val
    with nogil:
        for n in range(1, size + 1):
            scaled_prev[n] = sqrt(2.0 * n) * psi[n - 1]
        for n in range(size):
            for m in range(n + 1, size):
                val = (psi[n] * scaled_prev[m] - scaled_prev[n] * psi[m]) / (2.0 * (m - n))
                out[n, m] = val
                out[m, n] = val
        total = 0.5 * erfc(b)
        comp = 0.0
        out[0, 0] = total
        for n in range(1, size):
            # I[n+1, n-1] may fall outside the stored block when n = nmax
            if n + 1 < size:
                val = out[n + 1, n - 1]
            else:
                val = (psi[n + 1] * scaled_prev[n - 1] - scaled_prev[n + 1] * psi[n - 1]) / (-4.0)
            step = sqrt(2.0 / n) * psi[n] * psi[n - 1] - sqrt((n + 1.0) / n) * val
            if n >= 2:
                step += sqrt((n - 1.0) / n) * out[n, n - 2]
            t = total + step
            if fabs(total) >= fabs(step):
                comp += (total - t) + step
            else:
                comp += (step - t) + total
            total = t
            out[n, n] = total + comp
    return out_arr


def banded_bilinear(bands, offsets, left, right):
    cdef const double complex[:, ::1] cb = np.ascontiguousarray(bands, dtype=np.complex128)
    cdef const long[::1] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:, ::1] lm = np.ascontiguousarray(left, dtype=np.float64)
    cdef const double[:, ::1] rm = np.ascontiguousarray(right, dtype=np.float64)
    cdef Py_ssize_t size = lm.shape[0]
    cdef Py_ssize_t nb = offs.shape[0]
    wre_arr = np.zeros((size, size))
    wim_arr = np.zeros((size, size))
    cdef double[:, ::1] wre = wre_arr
    cdef double[:, ::1] wim = wim_arr
    cdef Py_ssize_t j, q, n, p, lo, hi, o, n4
    cdef double cre_j, cim_j, r, l
    cdef double a0, a1, a2, a3, b0, b1, b2, b3, rre, rim, vre, vim
    cdef double sre = 0.0, sim = 0.0, kre = 0.0, kim = 0.0, t
    with nogil:
        # work[q, n] = sum_j C[n, n + o_j] right[q, n + o_j]
        for q in range(size):
            for j in range(nb):
                o = offs[j]
                lo = -o if o < 0 else 0
                hi = size - o if o > 0 else size
                for n in range(lo, hi):
                    r = rm[q, n + o]
                    wre[q, n] += r * cb[j, n].real
                    wim[q, n] += r * cb[j, n].imag
        n4 = size - size % 4
        for j in range(nb):
            o = offs[j]
            lo = -o if o < 0 else 0
            hi = size - o if o > 0 else size
            for p in range(lo, hi):
                cre_j = cb[j, p].real
                cim_j = cb[j, p].imag
                if cre_j == 0.0 and cim_j == 0.0:
                    continue
                a0 = a1 = a2 = a3 = 0.0
                b0 = b1 = b2 = b3 = 0.0
                for n in range(0, n4, 4):
                    l = lm[p, n]
                    a0 += l * wre[p + o, n]
                    b0 += l * wim[p + o, n]
                    l = lm[p, n + 1]
                    a1 += l * wre[p + o, n + 1]
                    b1 += l * wim[p + o, n + 1]
                    l = lm[p, n + 2]
                    a2 += l * wre[p + o, n + 2]
                    b2 += l * wim[p + o, n + 2]
                    l = lm[p, n + 3]
                    a3 += l * wre[p + o, n + 3]
                    b3 += l * wim[p + o, n + 3]
                for n in range(n4, size):
                    a0 += lm[p, n] * wre[p + o, n]
                    b0 += lm[p, n] * wim[p + o, n]
                rre = (a0 + a1) + (a2 + a3)
                rim = (b0 + b1) + (b2 + b3)
                # conj(c) * row, Neumaier-accumulated per component
                vre = cre_j * rre + cim_j * rim
                vim = cre_j * rim - cim_j * rre
                t = sre + vre
                if fabs(sre) >= fabs(vre):
                    kre += (sre - t) + vre
                else:
                    kre += (vre - t) + sre
                sre = t
                t = sim + vim
                if fabs(sim) >= fabs(vim):
                    kim += (sim - t) + vim
                else:
                    kim += (vim - t) + sim
                sim = t
    return complex(sre + kre, sim + kim)
