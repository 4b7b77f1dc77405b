"""Hot numeric kernels: n-gram hashing, sparse projection, gradient scatter.

Each kernel has a numba ``@njit`` implementation and a pure-numpy twin. The
numpy path is selected when the ``OPSRAG_NO_NUMBA`` environment variable is
set (or numba is unavailable); both paths produce identical bucket ids and
numerically equivalent float results (summation order may differ).

``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)
_U64_MASK = (1 << 64) - 1


def _numba_disabled() -> bool:
    return os.environ.get("OPSRAG_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


# --- pure-numpy implementations ----------------------------------------------


def _ngram_bucket_ids_np(codes: np.ndarray, nmin: int, nmax: int, n_buckets: int) -> np.ndarray:
    """FNV-1a style hashes of all character n-grams, reduced mod n_buckets.

    ``codes`` is a uint64 array of codepoints. Texts shorter than ``nmin``
    hash as a single whole-text gram.
    """
    length = codes.shape[0]
    pieces = []
    for n in range(nmin, nmax + 1):
        m = length - n + 1
        if m <= 0:
            continue
        h = np.full(m, _FNV_OFFSET, dtype=np.uint64)
        for j in range(n):
            h = (h ^ codes[j : j + m]) * _FNV_PRIME
        pieces.append(h % np.uint64(n_buckets))
    if not pieces:
        h = int(_FNV_OFFSET)
        for c in codes:
            h = ((h ^ int(c)) * int(_FNV_PRIME)) & _U64_MASK
        pieces.append(np.array([h % n_buckets], dtype=np.uint64))
    return np.concatenate(pieces).astype(np.int64)


def _project_rows_np(
    weights: np.ndarray, indptr: np.ndarray, indices: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """Dense projections of CSR-encoded sparse feature rows: Z[t] = W @ x_t."""
    n = indptr.shape[0] - 1
    out = np.empty((n, weights.shape[0]), dtype=np.float64)
    for t in range(n):
        lo, hi = indptr[t], indptr[t + 1]
        cols = weights[:, indices[lo:hi]].astype(np.float64)
        out[t] = cols @ values[lo:hi]
    return out


def _scatter_grad_np(
    grad: np.ndarray,
    indptr: np.ndarray,
    positions: np.ndarray,
    values: np.ndarray,
    row_grads: np.ndarray,
) -> None:
    """Accumulate per-row outer products into grad columns.

    ``positions`` maps each CSR entry to its column slot in ``grad``;
    positions are unique within a row, so fancy-index += is safe per row.
    """
    n = indptr.shape[0] - 1
    for t in range(n):
        lo, hi = indptr[t], indptr[t + 1]
        grad[:, positions[lo:hi]] += row_grads[t][:, None] * values[lo:hi]


# --- numba implementations ----------------------------------------------------

if not _numba_disabled():
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _HAVE_NUMBA = False
else:
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True)
    def _ngram_bucket_ids_nb(codes, nmin, nmax, n_buckets):  # pragma: no cover - jitted
        length = codes.shape[0]
        total = 0
        for n in range(nmin, nmax + 1):
            if length >= n:
                total += length - n + 1
        nb = np.uint64(n_buckets)
        if total == 0:
            h = _FNV_OFFSET
            for i in range(length):
                h = (h ^ codes[i]) * _FNV_PRIME
            out = np.empty(1, dtype=np.int64)
            out[0] = np.int64(h % nb)
            return out
        out = np.empty(total, dtype=np.int64)
        pos = 0
        for n in range(nmin, nmax + 1):
            if length < n:
                continue
            for i in range(length - n + 1):
                h = _FNV_OFFSET
                for j in range(n):
                    h = (h ^ codes[i + j]) * _FNV_PRIME
                out[pos] = np.int64(h % nb)
                pos += 1
        return out

    @njit(cache=True)
    def _project_rows_nb(weights, indptr, indices, values):  # pragma: no cover - jitted
        n = indptr.shape[0] - 1
        d = weights.shape[0]
        out = np.zeros((n, d), dtype=np.float64)
        for t in range(n):
            for k in range(indptr[t], indptr[t + 1]):
                c = indices[k]
                v = values[k]
                for r in range(d):
                    out[t, r] += np.float64(weights[r, c]) * v
        return out

    @njit(cache=True)
    def _scatter_grad_nb(grad, indptr, positions, values, row_grads):  # pragma: no cover
        n = indptr.shape[0] - 1
        d = grad.shape[0]
        for t in range(n):
            for k in range(indptr[t], indptr[t + 1]):
                p = positions[k]
                v = values[k]
                for r in range(d):
                    grad[r, p] += row_grads[t, r] * v


USING_NUMBA = _HAVE_NUMBA

if USING_NUMBA:
    ngram_bucket_ids = _ngram_bucket_ids_nb
    project_rows = _project_rows_nb
    scatter_grad = _scatter_grad_nb
else:
    ngram_bucket_ids = _ngram_bucket_ids_np
    project_rows = _project_rows_np
    scatter_grad = _scatter_grad_np

# Always-importable references for the benchmark and equivalence tests.
numpy_impls = {
    "ngram_bucket_ids": _ngram_bucket_ids_np,
    "project_rows": _project_rows_np,
    "scatter_grad": _scatter_grad_np,
}
numba_impls = (
    {
        "ngram_bucket_ids": _ngram_bucket_ids_nb,
        "project_rows": _project_rows_nb,
        "scatter_grad": _scatter_grad_nb,
    }
    if USING_NUMBA
    else None
)
