# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for batched Fock transition amplitudes (Glynn permanents).

Same contracts as ``heraldopt.kernels._pure``; see that module for the math.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double complex _glynn(const double complex[:, :] b, Py_ssize_t n) noexcept:
    """Permanent of the top-left n x n block of ``b`` via Glynn's formula."""
    cdef Py_ssize_t d, r, c, count
    cdef int parity
    cdef double complex acc, prod, colsum
    cdef double delta
    if n == 0:
        return 1.0
    count = 1 << (n - 1)
    acc = 0.0
    for d in range(count):
        parity = 1
        prod = 1.0
        for c in range(n):
            colsum = b[0, c]
            for r in range(1, n):
                if (d >> (r - 1)) & 1:
                    colsum = colsum - b[r, c]
                else:
                    colsum = colsum + b[r, c]
            prod = prod * colsum
        r = d
        while r:
            r &= r - 1
            parity = -parity
        acc = acc + parity * prod
    return acc / <double>(1 << (n - 1))


def permanent(a):
    """Permanent of a square complex matrix (dimension 0 gives 1)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"permanent requires a square matrix, got shape {tuple(np.asarray(a).shape)}")
    if arr.shape[0] > 62:
        raise ValueError("permanent kernel supports matrices up to 62 x 62")
    return complex(_glynn(arr, arr.shape[0]))


def transition_matrix(u, row_reps, col_reps, row_norms, col_norms):
    """Batch of normalized Fock transition amplitudes; see ``_pure`` docs."""
    cdef const double complex[:, :] um = np.ascontiguousarray(u, dtype=np.complex128)
    cdef const long long[:, :] rr = np.ascontiguousarray(row_reps, dtype=np.int64)
    cdef const long long[:, :] cc = np.ascontiguousarray(col_reps, dtype=np.int64)
    cdef const double[:] rn = np.ascontiguousarray(row_norms, dtype=np.float64)
    cdef const double[:] cn = np.ascontiguousarray(col_norms, dtype=np.float64)
    cdef Py_ssize_t nrow = rr.shape[0], ncol = cc.shape[0], n = rr.shape[1]
    cdef Py_ssize_t k, j, r, c
    out = np.empty((nrow, ncol), dtype=np.complex128)
    cdef double complex[:, :] om = out
    cdef double complex[:, :] b = np.empty((max(n, 1), max(n, 1)), dtype=np.complex128)
    for k in range(nrow):
        for j in range(ncol):
            for r in range(n):
                for c in range(n):
                    b[r, c] = um[rr[k, r], cc[j, c]]
            om[k, j] = _glynn(b, n) / (rn[k] * cn[j])
    return out


def transition_gradient(u, row_reps, col_reps, row_norms, col_norms, weights):
    """Weighted sum of amplitude derivatives w.r.t. ``u``; see ``_pure`` docs."""
    cdef const double complex[:, :] um = np.ascontiguousarray(u, dtype=np.complex128)
    cdef const long long[:, :] rr = np.ascontiguousarray(row_reps, dtype=np.int64)
    cdef const long long[:, :] cc = np.ascontiguousarray(col_reps, dtype=np.int64)
    cdef const double[:] rn = np.ascontiguousarray(row_norms, dtype=np.float64)
    cdef const double[:] cn = np.ascontiguousarray(col_norms, dtype=np.float64)
    cdef const double complex[:, :] wm = np.ascontiguousarray(weights, dtype=np.complex128)
    cdef Py_ssize_t m = um.shape[0]
    cdef Py_ssize_t nrow = rr.shape[0], ncol = cc.shape[0], n = rr.shape[1]
    cdef Py_ssize_t k, j, r, c, d, count, t
    cdef int parity
    cdef double complex w, colsum, term
    grad = np.zeros((m, m), dtype=np.complex128)
    cdef double complex[:, :] gm = grad
    if n == 0:
        return grad
    count = 1 << (n - 1)
    cdef double complex[:, :] b = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:] s = np.empty(n, dtype=np.complex128)
    cdef double complex[:] pref = np.empty(n, dtype=np.complex128)
    cdef double complex[:] suff = np.empty(n, dtype=np.complex128)
    cdef double complex[:, :] dperm = np.empty((n, n), dtype=np.complex128)
    cdef double scale = 1.0 / <double>count
    for k in range(nrow):
        for j in range(ncol):
            w = wm[k, j]
            if w == 0:
                continue
            w = w * scale / (rn[k] * cn[j])
            for r in range(n):
                for c in range(n):
                    b[r, c] = um[rr[k, r], cc[j, c]]
                    dperm[r, c] = 0.0
            for d in range(count):
                parity = 1
                t = d
                while t:
                    t &= t - 1
                    parity = -parity
                for c in range(n):
                    colsum = b[0, c]
                    for r in range(1, n):
                        if (d >> (r - 1)) & 1:
                            colsum = colsum - b[r, c]
                        else:
                            colsum = colsum + b[r, c]
                    s[c] = colsum
                pref[0] = 1.0
                for c in range(1, n):
                    pref[c] = pref[c - 1] * s[c - 1]
                suff[n - 1] = 1.0
                for c in range(n - 2, -1, -1):
                    suff[c] = suff[c + 1] * s[c + 1]
                for c in range(n):
                    term = parity * pref[c] * suff[c]
                    dperm[0, c] = dperm[0, c] + term
                    for r in range(1, n):
                        if (d >> (r - 1)) & 1:
                            dperm[r, c] = dperm[r, c] - term
                        else:
                            dperm[r, c] = dperm[r, c] + term
            for r in range(n):
                for c in range(n):
                    gm[rr[k, r], cc[j, c]] = gm[rr[k, r], cc[j, c]] + w * dperm[r, c]
    return grad
