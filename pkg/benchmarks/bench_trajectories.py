#!/usr/bin/env python3
"""Benchmark the trajectory ensemble: numba kernel vs pure-numpy fallback.

Runs the two-channel dephasing preset over a 101-point grid and times
run_ensemble for growing trajectory counts on both backends.  The first
numba call is excluded via a warmup so JIT compilation does not pollute
the numbers.
"""

import time

import numpy as np

from lindbladrate.qubit import dephasing_model, preset_params
from lindbladrate.stochastic import run_ensemble

RHO_PLUS_X = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)


def best_of(walk, grid, n, backend, repeats=3):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        acc = run_ensemble(walk, RHO_PLUS_X, grid, n, master_seed=12345, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, acc


def main():
    _, walk = dephasing_model(preset_params("fig2"))
    grid = np.linspace(0.0, 20.0, 101)

    run_ensemble(walk, RHO_PLUS_X, grid, 64, master_seed=1, backend="numba")  # warmup / JIT

    print(f"{'n':>8} {'numba [s]':>12} {'numpy [s]':>12} {'speedup':>9} {'max |diff|':>12}")
    for n in (1000, 10000, 100000):
        t_nb, acc_nb = best_of(walk, grid, n, "numba")
        t_np, acc_np = best_of(walk, grid, n, "numpy", repeats=1 if n >= 100000 else 2)
        diff = np.abs(acc_nb.channel_sums - acc_np.channel_sums).max()
        print(f"{n:>8} {t_nb:>12.4f} {t_np:>12.4f} {t_np / t_nb:>9.1f} {diff:>12.3e}")


if __name__ == "__main__":
    main()
