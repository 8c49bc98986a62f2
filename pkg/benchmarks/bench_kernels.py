#!/usr/bin/env python3
"""Benchmark the hot kernels: numba JIT versus the pure-numpy fallback.

Workloads mirror the package's real call sites: interval inversion
re-estimates effects over hundreds of thousands of randomized
assignments, the exact oracle sweeps every balanced assignment, and the
binary study steps a 12k-iteration Metropolis chain. JIT compilation is
triggered once before timing.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from factorial_causal import _kernels, build_design
from factorial_causal.assignment import assignment_draws, count_assignments


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads():
    rng = np.random.default_rng(0)

    d2 = build_design(2)
    small_outcomes = rng.normal(size=(20, 4))
    small_draws = assignment_draws(20, d2, 200_000, seed=1)
    small_scaled = np.ascontiguousarray(d2.effect_contrasts / (2.0 * 5))

    d3 = build_design(3)
    big_outcomes = rng.normal(size=(800, 8))
    big_draws = assignment_draws(800, d3, 20_000, seed=2)
    big_scaled = np.ascontiguousarray(d3.effect_contrasts / (4.0 * 100))

    enum_outcomes = np.ascontiguousarray(rng.normal(size=(12, 4)))
    enum_count = count_assignments(12, d2)

    n_steps = 12_000
    predictors = np.column_stack(
        [np.ones(8), d3.contrast_column(3), d3.contrast_column(5)]
    )
    successes = rng.integers(40, 95, 8).astype(float)
    chain_args = (
        np.zeros(3),
        np.full(3, 0.3),
        rng.standard_normal((n_steps, 3)),
        np.log(rng.random(n_steps)),
        successes,
        100.0 - successes,
        predictors,
        np.zeros(3),
        np.eye(3) / 100.0,
    )

    return [
        (
            "randomization_effects (N=20, J=4, 200k draws)",
            "randomization_effects",
            (small_outcomes, small_draws, small_scaled),
        ),
        (
            "randomization_effects (N=800, J=8, 20k draws)",
            "randomization_effects",
            (big_outcomes, big_draws, big_scaled),
        ),
        (
            f"enumerated_effects (N=12, J=4, {enum_count} assignments)",
            "enumerated_effects",
            (enum_outcomes, small_scaled, enum_count),
        ),
        (
            "logistic_mh_chain (12k steps, 3 parameters)",
            "logistic_mh_chain",
            chain_args,
        ),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = list(_kernels.IMPLEMENTATIONS)
    if "numba" not in backends:
        print("numba unavailable: timing the numpy fallback only")

    print(f"{'workload':<52} " + " ".join(f"{b:>12}" for b in backends) + "  speedup")
    for label, name, fn_args in workloads():
        times = {}
        for backend in backends:
            fn = _kernels.IMPLEMENTATIONS[backend][name]
            fn(*fn_args)  # warm-up / JIT compile
            times[backend] = best_of(lambda: fn(*fn_args), args.repeats)
        row = f"{label:<52} " + " ".join(f"{times[b]*1e3:>10.2f}ms" for b in backends)
        if "numba" in times:
            row += f"  {times['numpy'] / times['numba']:>6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
