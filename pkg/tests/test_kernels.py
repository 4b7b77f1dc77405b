"""Equivalence of the numba kernels and their pure-numpy twins.

Hash bucket ids must match exactly; float kernels may differ only by
summation order. Skipped when the numba path is disabled via the
OPSRAG_NO_NUMBA environment variable (the numpy twins are then the live
implementation and are exercised by the whole suite).
"""

import numpy as np
import pytest

from opsrag import _kernels

needs_numba = pytest.mark.skipif(
    not _kernels.USING_NUMBA, reason="numba path disabled or unavailable"
)


def random_csr(rng, n_rows, n_cols):
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    indices, values = [], []
    for r in range(n_rows):
        nnz = int(rng.integers(1, 20))
        cols = rng.choice(n_cols, size=nnz, replace=False)
        cols.sort()
        indices.append(cols.astype(np.int64))
        values.append(rng.random(nnz))
        indptr[r + 1] = indptr[r] + nnz
    return indptr, np.concatenate(indices), np.concatenate(values)


@needs_numba
def test_ngram_bucket_ids_identical():
    rng = np.random.default_rng(0)
    for _ in range(50):
        length = int(rng.integers(1, 200))
        codes = rng.integers(32, 0x2600, size=length).astype(np.uint64)
        a = _kernels.numba_impls["ngram_bucket_ids"](codes, 3, 5, 1 << 18)
        b = _kernels.numpy_impls["ngram_bucket_ids"](codes, 3, 5, 1 << 18)
        assert np.array_equal(np.sort(a), np.sort(b))


@needs_numba
def test_short_text_whole_gram_identical():
    codes = np.array([101, 102], dtype=np.uint64)  # shorter than nmin
    a = _kernels.numba_impls["ngram_bucket_ids"](codes, 3, 5, 4096)
    b = _kernels.numpy_impls["ngram_bucket_ids"](codes, 3, 5, 4096)
    assert a.shape == (1,) and np.array_equal(a, b)


@needs_numba
def test_project_rows_equivalent():
    rng = np.random.default_rng(1)
    weights = rng.standard_normal((16, 512)).astype(np.float32)
    indptr, indices, values = random_csr(rng, 8, 512)
    a = _kernels.numba_impls["project_rows"](weights, indptr, indices, values)
    b = _kernels.numpy_impls["project_rows"](weights, indptr, indices, values)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_numba
def test_scatter_grad_equivalent():
    rng = np.random.default_rng(2)
    indptr, indices, values = random_csr(rng, 6, 256)
    cols = np.unique(indices)
    positions = np.searchsorted(cols, indices)
    row_grads = rng.standard_normal((6, 16))
    a = np.zeros((16, cols.shape[0]))
    b = np.zeros((16, cols.shape[0]))
    _kernels.numba_impls["scatter_grad"](a, indptr, positions, values, row_grads)
    _kernels.numpy_impls["scatter_grad"](b, indptr, positions, values, row_grads)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_hash_ids_deterministic_across_calls():
    codes = np.frombuffer("rolling deploy".encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
    a = _kernels.ngram_bucket_ids(codes, 3, 5, 1 << 16)
    b = _kernels.ngram_bucket_ids(codes, 3, 5, 1 << 16)
    assert np.array_equal(a, b)


def test_bucket_ids_in_range():
    rng = np.random.default_rng(3)
    codes = rng.integers(32, 0x10000, size=500).astype(np.uint64)
    ids = _kernels.ngram_bucket_ids(codes, 3, 5, 1000)
    assert ids.min() >= 0 and ids.max() < 1000
