"""Pure-numpy evaluation of Fock transition amplitudes.

These are the hot kernels of the package: every loss evaluation during
training reduces to a batch of small matrix permanents.  The compiled
extension in ``_speedups.pyx`` implements the same three functions; this
module is the fallback used when the extension is not built.

All permanents use Glynn's formula

    perm(B) = 2^{1-n} * sum_{d in {+-1}^n, d_0 = +1} (prod_i d_i)
              * prod_c (sum_r d_r * B[r, c])

which costs O(2^n * n^2) per matrix and vectorizes well over batches.
"""

import numpy as np

__all__ = ["permanent", "transition_matrix", "transition_gradient"]

# Keep the delta-sign tables for small n around; they are reused constantly.
_DELTA_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _deltas(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Glynn delta vectors (2^{n-1}, n) with d_0 fixed to +1, and their signs."""
    cached = _DELTA_CACHE.get(n)
    if cached is not None:
        return cached
    count = 1 << (n - 1)
    idx = np.arange(count, dtype=np.uint64)
    bits = (idx[:, None] >> np.arange(n - 1, dtype=np.uint64)[None, :]) & 1
    deltas = np.empty((count, n), dtype=np.float64)
    deltas[:, 0] = 1.0
    deltas[:, 1:] = 1.0 - 2.0 * bits
    signs = np.where(bits.sum(axis=1) % 2 == 0, 1.0, -1.0)
    _DELTA_CACHE[n] = (deltas, signs)
    return deltas, signs


def permanent(a: np.ndarray) -> complex:
    """Permanent of a square complex matrix (dimension 0 gives 1)."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"permanent requires a square matrix, got shape {a.shape}")
    if n == 0:
        return 1.0 + 0.0j
    deltas, signs = _deltas(n)
    col_sums = deltas @ a                       # (2^{n-1}, n)
    return complex(signs @ col_sums.prod(axis=1) * 2.0 ** (1 - n))


def transition_matrix(u, row_reps, col_reps, row_norms, col_norms):
    """Batch of Fock transition amplitudes of a mode matrix ``u``.

    ``row_reps[k]``/``col_reps[j]`` hold the mode index of each photon in the
    output/input occupation pattern (row/column repetition lists, length N).
    Entry (k, j) is perm(u[row_reps[k], :][:, col_reps[j]]) divided by
    ``row_norms[k] * col_norms[j]``.
    """
    u = np.asarray(u, dtype=np.complex128)
    row_reps = np.asarray(row_reps, dtype=np.int64)
    col_reps = np.asarray(col_reps, dtype=np.int64)
    nrow, n = row_reps.shape
    ncol = col_reps.shape[0]
    if n == 0:
        out = np.ones((nrow, ncol), dtype=np.complex128)
    else:
        deltas, signs = _deltas(n)
        out = np.empty((nrow, ncol), dtype=np.complex128)
        # Chunk over output patterns to bound the (chunk, 2^{n-1}, ncol, n)
        # intermediate.
        chunk = max(1, int(4e6 // max(1, (1 << (n - 1)) * ncol * n)))
        scale = 2.0 ** (1 - n)
        for lo in range(0, nrow, chunk):
            rr = row_reps[lo : lo + chunk]
            # per-delta sums over repeated rows, for every mode column of u
            e = np.einsum("dr,krm->kdm", deltas, u[rr])
            s = e[:, :, col_reps]               # (k, d, j, n)
            out[lo : lo + chunk] = np.einsum("d,kdj->kj", signs, s.prod(axis=-1)) * scale
    out /= np.asarray(row_norms)[:, None]
    out /= np.asarray(col_norms)[None, :]
    return out


def transition_gradient(u, row_reps, col_reps, row_norms, col_norms, weights):
    """Weighted sum of transition-amplitude derivatives w.r.t. ``u``.

    Returns G with G[a, b] = sum_{k,j} weights[k, j] * d(amp_{k,j}) / d u[a, b],
    where amp is the normalized permanent of ``transition_matrix``.  Used to
    backpropagate a scalar loss from output amplitudes to the mode matrix.
    """
    u = np.asarray(u, dtype=np.complex128)
    row_reps = np.asarray(row_reps, dtype=np.int64)
    col_reps = np.asarray(col_reps, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.complex128)
    m = u.shape[0]
    nrow, n = row_reps.shape
    grad = np.zeros((m, m), dtype=np.complex128)
    if n == 0:
        return grad
    deltas, signs = _deltas(n)
    e = np.einsum("dr,krm->kdm", deltas, u[row_reps])
    s = e[:, :, col_reps]                       # (k, d, j, n) column sums
    # product over all columns except one, via prefix/suffix cumprods
    pref = np.ones_like(s)
    suff = np.ones_like(s)
    np.cumprod(s[..., :-1], axis=-1, out=pref[..., 1:])
    np.cumprod(s[..., :0:-1], axis=-1, out=suff[..., -2::-1])
    prod_except = pref * suff
    signed = signs[:, None] * deltas            # (d, r)
    dperm = np.einsum("dr,kdjc->kjrc", signed, prod_except) * 2.0 ** (1 - n)
    w = weights / np.outer(row_norms, col_norms)
    contrib = w[:, :, None, None] * dperm       # (k, j, r, c)
    rows = np.broadcast_to(row_reps[:, None, :, None], contrib.shape)
    cols = np.broadcast_to(col_reps[None, :, None, :], contrib.shape)
    np.add.at(grad, (rows.ravel(), cols.ravel()), contrib.ravel())
    return grad
