#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py

Covers the three hot paths: RK4 integration spans, the spanning-unicyclic
accumulation behind the identity check, and Perron power iteration.
"""

import time

import numpy as np

from patchlv import _purekernels

try:
    from patchlv import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _coupling(rng, n):
    W = rng.uniform(0.1, 2.0, (n, n))
    np.fill_diagonal(W, 0.0)
    return np.ascontiguousarray(W - np.diag(W.sum(axis=0))), W


def bench_rk4(backend, L, p, q, y0, steps):
    backend.rk4_two_span(L, 0.4, 1.2, p, q, 0.7, 0.9, y0, steps, 0.005)


def bench_tree_cycle(backend, W, F):
    backend.tree_cycle_rhs(np.ascontiguousarray(W), F)


def bench_power(backend, B):
    backend.power_iteration(B, 1e-12, 100_000)


def main():
    rng = np.random.default_rng(0)
    rows = []

    n = 4
    L, _ = _coupling(rng, n)
    p = rng.uniform(0.5, 2.0, n)
    q = rng.uniform(0.5, 2.0, n)
    y0 = rng.uniform(0.1, 1.0, 2 * n)
    steps = 200_000
    rows.append(
        (
            f"rk4 two-species span (n={n}, {steps} steps)",
            lambda b: bench_rk4(b, L, p, q, y0, steps),
        )
    )

    n6 = 6
    W6 = rng.uniform(0.1, 2.0, (n6, n6))
    np.fill_diagonal(W6, 0.0)
    F6 = rng.uniform(-1.0, 1.0, (n6, n6))
    rows.append(
        (
            f"spanning-unicyclic sum (complete n={n6})",
            lambda b: bench_tree_cycle(b, W6, F6),
        )
    )

    n_p = 40
    B = rng.uniform(0.0, 1.0, (n_p, n_p)) + np.eye(n_p)
    B = np.ascontiguousarray(B)
    rows.append((f"power iteration (n={n_p})", lambda b: bench_power(b, B)))

    print(f"{'kernel':<45} {'pure':>10} {'compiled':>10} {'speedup':>9}")
    for name, fn in rows:
        t_pure = _time(lambda: fn(_purekernels))
        if _kernels is None:
            print(f"{name:<45} {t_pure*1e3:9.1f}ms {'n/a':>10} {'n/a':>9}")
            continue
        t_comp = _time(lambda: fn(_kernels))
        print(
            f"{name:<45} {t_pure*1e3:9.1f}ms {t_comp*1e3:9.1f}ms "
            f"{t_pure / t_comp:8.1f}x"
        )


if __name__ == "__main__":
    main()
