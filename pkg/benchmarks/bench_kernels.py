"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--rows N] [--cols N]
"""

import argparse
import time

import numpy as np

from qosdiff import kernels


def timeit(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=339)
    parser.add_argument("--cols", type=int, default=2000)
    parser.add_argument("--density", type=float, default=0.1)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    values = rng.uniform(0.1, 20.0, size=(args.rows, args.cols))
    mask = rng.random((args.rows, args.cols)) < args.density
    values *= mask

    print(f"matrix {args.rows}x{args.cols}, density {args.density:g}, "
          f"numba available: {kernels.HAVE_NUMBA}")

    # warm up jit compilation outside the timed region
    if kernels.HAVE_NUMBA:
        kernels.pearson_matrix(values[:4], mask[:4], use_numba=True)

    t_np, sim_np = timeit(
        lambda: kernels.pearson_matrix(values, mask, use_numba=False))
    print(f"pearson_matrix   numpy {t_np * 1e3:9.1f} ms")
    if kernels.HAVE_NUMBA:
        t_nb, sim_nb = timeit(
            lambda: kernels.pearson_matrix(values, mask, use_numba=True))
        print(f"pearson_matrix   numba {t_nb * 1e3:9.1f} ms "
              f"(x{t_np / t_nb:.1f})")
        assert np.allclose(sim_np, sim_nb, atol=1e-10)
    sim = sim_np

    nb = kernels.top_k_neighbors(sim, 10)
    means = np.where(mask.any(axis=1),
                     values.sum(axis=1) / np.maximum(mask.sum(axis=1), 1),
                     0.0)
    n_queries = 100_000
    rows = rng.integers(0, args.rows, size=n_queries)
    cols = rng.integers(0, args.cols, size=n_queries)

    if kernels.HAVE_NUMBA:
        kernels.neighbor_predict(rows[:8], cols[:8], values, mask, sim, nb,
                                 means, use_numba=True)
        t_nb, p_nb = timeit(lambda: kernels.neighbor_predict(
            rows, cols, values, mask, sim, nb, means, use_numba=True))
        print(f"neighbor_predict numba {t_nb * 1e3:9.1f} ms "
              f"({n_queries} queries)")
    t_np, p_np = timeit(lambda: kernels.neighbor_predict(
        rows, cols, values, mask, sim, nb, means, use_numba=False))
    print(f"neighbor_predict numpy {t_np * 1e3:9.1f} ms")
    if kernels.HAVE_NUMBA:
        print(f"neighbor_predict speedup x{t_np / t_nb:.1f}")
        assert np.allclose(p_np, p_nb, atol=1e-10)

    ui, si = np.nonzero(mask)
    vals = values[ui, si]

    def run_sgd(use):
        r = np.random.default_rng(0)
        p = r.standard_normal((args.rows, 10)) * 0.1
        q = r.standard_normal((args.cols, 10)) * 0.1
        bu, bs = np.zeros(args.rows), np.zeros(args.cols)
        return kernels.sgd_factorize(ui, si, vals, p, q, bu, bs,
                                     float(vals.mean()), 0.01, 0.01, 10,
                                     True, use_numba=use)

    if kernels.HAVE_NUMBA:
        run_sgd(True)  # warm up
        t_nb, _ = timeit(lambda: run_sgd(True), repeats=1)
        print(f"sgd_factorize    numba {t_nb * 1e3:9.1f} ms (10 epochs)")
    t_np, _ = timeit(lambda: run_sgd(False), repeats=1)
    print(f"sgd_factorize    numpy {t_np * 1e3:9.1f} ms")
    if kernels.HAVE_NUMBA:
        print(f"sgd_factorize    speedup x{t_np / t_nb:.1f}")


if __name__ == "__main__":
    main()
