"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py
The same comparison end-to-end: OPSRAG_NO_NUMBA=1 switches the whole package
to the numpy path.
"""

import time

import numpy as np

from opsrag import _kernels


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up (JIT compile, caches)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_hashing(rng):
    texts = [
        "".join(chr(int(c)) for c in rng.integers(97, 123, size=int(rng.integers(200, 2000))))
        for _ in range(300)
    ]
    codes = [np.frombuffer(t.encode("utf-32-le"), dtype=np.uint32).astype(np.uint64) for t in texts]

    def run(impl):
        for c in codes:
            impl(c, 3, 5, 1 << 18)

    return {"n-gram hashing (300 texts)": run}


def bench_projection(rng):
    weights = rng.standard_normal((256, 1 << 16)).astype(np.float32)
    n_rows = 256
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    idx_parts, val_parts = [], []
    for r in range(n_rows):
        nnz = int(rng.integers(400, 1200))
        cols = np.sort(rng.choice(1 << 16, size=nnz, replace=False)).astype(np.int64)
        idx_parts.append(cols)
        val_parts.append(rng.random(nnz))
        indptr[r + 1] = indptr[r] + nnz
    indices = np.concatenate(idx_parts)
    values = np.concatenate(val_parts)

    def run_project(impl):
        impl(weights, indptr, indices, values)

    cols = np.unique(indices)
    positions = np.searchsorted(cols, indices)
    row_grads = rng.standard_normal((n_rows, 256))

    def run_scatter(impl):
        grad = np.zeros((256, cols.shape[0]))
        impl(grad, indptr, positions, values, row_grads)

    return {
        "sparse projection (256 rows x 256 dims)": run_project,
        "gradient scatter (256 rows)": run_scatter,
    }


def main():
    rng = np.random.default_rng(0)
    if _kernels.numba_impls is None:
        print("numba path unavailable (OPSRAG_NO_NUMBA set or numba missing); nothing to compare")
        return
    cases = {}
    cases.update(bench_hashing(rng))
    cases.update(bench_projection(rng))

    name_of = {
        "n-gram hashing (300 texts)": "ngram_bucket_ids",
        "sparse projection (256 rows x 256 dims)": "project_rows",
        "gradient scatter (256 rows)": "scatter_grad",
    }
    print(f"{'kernel':44s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label, runner in cases.items():
        key = name_of[label]
        t_nb = timeit(runner, _kernels.numba_impls[key])
        t_np = timeit(runner, _kernels.numpy_impls[key])
        print(f"{label:44s} {t_nb * 1e3:9.2f}ms {t_np * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
