"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot functions (single permanent, batched transition
matrix, weighted transition gradient) on the problem size the optimizer
actually runs: the 6-mode, 4-photon sector with its 126-state basis.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from heraldopt import fock
from heraldopt.kernels import _pure

try:
    from heraldopt.kernels import _speedups
except ImportError:
    _speedups = None


def random_unitary(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def best_of(func, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    sector = fock.enumerate_basis(6, 4)
    reps, norms = sector.repeated_indices, sector.norms
    u = random_unitary(6, rng)
    a8 = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    weights = rng.normal(size=(sector.dim, sector.dim)) + 1j * rng.normal(
        size=(sector.dim, sector.dim)
    )

    cases = [
        ("permanent 8x8", lambda mod: lambda: mod.permanent(a8)),
        (
            "transition_matrix 126x126",
            lambda mod: lambda: mod.transition_matrix(u, reps, reps, norms, norms),
        ),
        (
            "transition_gradient 126x126",
            lambda mod: lambda: mod.transition_gradient(
                u, reps, reps, norms, norms, weights
            ),
        ),
    ]

    backends = [("python", _pure)]
    if _speedups is not None:
        backends.append(("cython", _speedups))
    else:
        print("compiled extension not built; timing the fallback only\n")

    print(f"{'kernel':<30} " + " ".join(f"{name:>12}" for name, _ in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for label, make in cases:
        times = [best_of(make(mod), args.repeats) for _, mod in backends]
        row = f"{label:<30} " + " ".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
