"""Benchmark the compiled kernels against the numpy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py

The workloads mirror the hot paths of the solvers: a slope right next to
a flat curve segment (where the certificate closes slowly and the
iteration cap is reached), a typical fast-converging slope, tight-tolerance
Sinkhorn scaling, and the symmetric-NMF update loop.
"""

import math
import time

import numpy as np

from llrd import _kernels_py

try:
    from llrd import _kernels_cy
except ImportError:  # extension not built
    _kernels_cy = None


def _fig3_distortion() -> np.ndarray:
    cond = np.array([[0.8, 0.4, 0.2], [0.2, 0.6, 0.8]])
    return -np.log(cond)


def bench_ba_flat(impl):
    p = np.array([0.65, 0.35])
    d = _fig3_distortion()
    logq0 = np.full(3, -math.log(3.0))
    return lambda: impl.ba_iterate(p, d, 1.0001, logq0, 1e-10, 10**5)


def bench_ba_typical(impl):
    p = np.array([0.75, 0.25])
    d = -np.log(np.array([[0.9, 0.1], [0.1, 0.9]]))
    logq0 = np.full(2, -math.log(2.0))
    return lambda: impl.ba_iterate(p, d, 2.0, logq0, 1e-10, 10**5)


def bench_sinkhorn(impl):
    rng = np.random.default_rng(0)
    n = 8
    grid = np.arange(float(n))
    d = (grid[:, None] - grid[None, :]) ** 2
    logk = -0.8 * d
    p = rng.dirichlet(np.ones(n))
    logp = np.log(p)
    loga0 = logp.copy()
    logb0 = np.zeros(n)
    return lambda: impl.sinkhorn_scale(logk, logp, loga0, logb0, 1e-12, 10**5)


def bench_symnmf(impl):
    rng = np.random.default_rng(1)
    n = 8
    a = math.exp(-1.0)
    v = (1 - a) * np.eye(n) + a * np.ones((n, n))
    b0 = rng.uniform(0.1, 1.0, size=(n, n + 1))
    return lambda: impl.symnmf_run(v, b0, 5000)


WORKLOADS = [
    ("ba near-flat slope (hits iteration cap)", bench_ba_flat),
    ("ba typical slope", bench_ba_typical),
    ("sinkhorn 8x8, tol 1e-12", bench_sinkhorn),
    ("symnmf 8x9, 5000 updates", bench_symnmf),
]


def best_of(fn, repeat: int = 3) -> float:
    best = math.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    if _kernels_cy is None:
        print("compiled extension not available; timing the fallback only")
    header = f"{'workload':<42}{'python':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, make in WORKLOADS:
        t_py = best_of(make(_kernels_py))
        if _kernels_cy is not None:
            t_cy = best_of(make(_kernels_cy))
            print(f"{name:<42}{t_py:>11.4f}s{t_cy:>11.4f}s{t_py / t_cy:>9.1f}x")
        else:
            print(f"{name:<42}{t_py:>11.4f}s{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
