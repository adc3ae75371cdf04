"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from isinggap import _fallback
from isinggap.generators import sk_model
from isinggap.rng import SeededRng

try:
    from isinggap import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    m16 = sk_model(16, 0.5, SeededRng(1))
    m64 = sk_model(64, 0.5, SeededRng(2))
    m20 = sk_model(20, 0.5, SeededRng(3))
    rng = SeededRng(4)
    steps = 200_000
    sites = rng.integers(64, steps).astype(np.int64)
    us = rng.uniform(steps)
    w = np.abs(m20.J[0])
    b = np.delete(w, 0)

    def glauber(mod):
        x = np.ones(64, dtype=np.int8)
        return lambda: mod.glauber_run(m64.J, m64.h, x, sites, us, 1000)

    return [
        ("jacobi_eigh n=64", lambda mod: lambda: mod.jacobi_eigh(np.array(m64.J))),
        ("log_weights n=16", lambda mod: lambda: mod.log_weights(m16.J, m16.h)),
        ("glauber_run n=64, 2e5 updates", glauber),
        ("influence_max n=20", lambda mod: lambda: mod.influence_max(b, 0.3, 0.1)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':34s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, make in cases():
        tp = best_of(make(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:34s} {tp:11.4f} {'n/a':>13s}")
            continue
        tc = best_of(make(_kernels), args.repeat)
        print(f"{name:34s} {tp:11.4f} {tc:13.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
