#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-NumPy/Python fallback.

Runs each hot kernel through both implementations on identical inputs,
checks that the results agree, and prints the timings.  The active package
backend (EXACTLAB_BACKEND) does not matter here; both paths are invoked
explicitly.
"""

import time

import numpy as np

from exactlab import kernels
from exactlab.backend import NUMBA_ENABLED


def timeit(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_agreement(d=22):
    rng = np.random.default_rng(0)
    w1 = rng.integers(-8, 9, size=d).astype(np.int64)
    w2 = w1.copy()
    w2[d // 2] += 1
    b1, b2 = np.int64(-1), np.int64(2)
    t_np, r_np = timeit(kernels.agree_stats_int_numpy, w1, b1, w2, b2, d, repeats=1)
    if kernels.agree_stats_int_jit is None:
        print(f"cube agreement d={d}: numpy {t_np*1e3:8.1f} ms   (numba unavailable)")
        return
    kernels.agree_stats_int_jit(w1, b1, w2, b2, 4)  # compile
    t_jit, r_jit = timeit(kernels.agree_stats_int_jit, w1, b1, w2, b2, d)
    assert tuple(r_np) == tuple(map(int, r_jit))
    print(
        f"cube agreement d={d}: numba {t_jit*1e3:8.1f} ms   numpy {t_np*1e3:8.1f} ms"
        f"   speedup {t_np/t_jit:6.1f}x"
    )


def bench_qp(K=1500, dim=12):
    rng = np.random.default_rng(1)
    A = rng.standard_normal((K, dim)) + 2.0
    sq = np.einsum("ij,ij->i", A, A)

    def solve(fn):
        lam = np.zeros(K)
        w = np.zeros(dim)
        fn(A, sq, lam, w, 1e-10, 4000, 1e8)
        return w

    t_py, w_py = timeit(lambda: solve(kernels._qp_sweeps), repeats=1)
    if not NUMBA_ENABLED:
        print(f"margin QP   K={K}: python {t_py*1e3:8.1f} ms   (numba unavailable)")
        return
    jit = kernels.qp_sweeps if kernels.qp_sweeps is not kernels._qp_sweeps else None
    if jit is None:
        from numba import njit

        jit = njit(cache=True)(kernels._qp_sweeps)
    solve(jit)  # compile
    t_jit, w_jit = timeit(lambda: solve(jit))
    assert np.allclose(w_py, w_jit, atol=1e-8)
    print(
        f"margin QP   K={K}: numba {t_jit*1e3:8.1f} ms   python {t_py*1e3:8.1f} ms"
        f"   speedup {t_py/t_jit:6.1f}x"
    )


def bench_perceptron(n=4000, d=16):
    rng = np.random.default_rng(2)
    X = rng.integers(0, 2, size=(n, d)).astype(np.int64)
    w_true = rng.integers(-4, 5, size=d)
    y = ((X @ w_true - 1) >= 0).astype(np.int64)
    t_py, r_py = timeit(lambda: kernels._perceptron_train(X, y, 200), repeats=1)
    if not NUMBA_ENABLED:
        print(f"perceptron n={n}: python {t_py*1e3:8.1f} ms   (numba unavailable)")
        return
    jit = kernels.perceptron_train
    if jit is kernels._perceptron_train:
        from numba import njit

        jit = njit(cache=True)(kernels._perceptron_train)
    jit(X[:8], y[:8], 5)  # compile
    t_jit, r_jit = timeit(lambda: jit(X, y, 200))
    assert np.array_equal(r_py[0], r_jit[0]) and r_py[1] == r_jit[1]
    print(
        f"perceptron n={n}: numba {t_jit*1e3:8.1f} ms   python {t_py*1e3:8.1f} ms"
        f"   speedup {t_py/t_jit:6.1f}x"
    )


def bench_flow(n=24, d=10, t_max=1e8):
    rng = np.random.default_rng(3)
    X = rng.integers(0, 2, size=(n, d)).astype(np.float64)
    Xa = np.hstack([X, np.ones((n, 1))])
    w_true = rng.standard_normal(d)
    ypm = np.where(X @ w_true - 0.3 >= 0, 1.0, -1.0)
    t_eval = np.geomspace(1e-2, t_max, 200)

    def run(fn):
        return fn(Xa, ypm.copy(), t_eval, 1e-7, 1e-9, np.zeros(d + 1), 5_000_000)

    t_py, r_py = timeit(lambda: run(kernels._dp45_flow), repeats=1)
    if not NUMBA_ENABLED:
        print(f"flow dp45  n={n}: python {t_py*1e3:8.1f} ms   (numba unavailable)")
        return
    t_jit, r_jit = timeit(lambda: run(kernels.dp45_flow))
    assert r_py[1] == r_jit[1]
    # libm exp differs by ulps between the backends, so adaptive trajectories
    # agree only to the integration tolerance, not bitwise
    assert np.allclose(r_py[0], r_jit[0], rtol=1e-3, atol=1e-6)
    print(
        f"flow dp45  n={n}: numba {t_jit*1e3:8.1f} ms   python {t_py*1e3:8.1f} ms"
        f"   speedup {t_py/t_jit:6.1f}x"
    )


if __name__ == "__main__":
    print(f"numba available: {NUMBA_ENABLED}")
    kernels.warmup()
    bench_agreement()
    bench_qp()
    bench_perceptron()
    bench_flow()
