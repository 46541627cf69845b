"""Time one simulation trial with the numba kernels and with the fallback.

Usage: python benchmarks/bench_kernels.py [--horizon 200000] [--repeat 3]

The fallback is what SPECSHAPE_NO_NUMBA=1 selects: numpy PU kernel and the
plain-python SU loop. Both paths consume the same pre-drawn randomness, so
the totals are checked for equality as well.
"""

import argparse
import time

import numpy as np

from specshape.core import NetworkConfig, SuStrategy
from specshape.sim import kernels
from specshape.sim.engine import run_trial


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if kernels.pu_chunk_numba is None:
        print("numba not installed; nothing to compare")
        return
    print(f"default path: {'numba' if kernels.USE_NUMBA else 'fallback'}")
    print(f"{'strategy':<24}{'numba s':>10}{'fallback s':>12}{'speedup':>9}  same")
    for strategy in SuStrategy:
        n = 1 if strategy is SuStrategy.SINGLE_CHANNEL else 10
        cfg = NetworkConfig(num_channels=n, su_strategy=strategy, batch_size=5, erasure_prob=0.1, backoff=2)
        ss = np.random.SeedSequence(1)
        fast = lambda: run_trial(cfg, args.horizon, 0, ss, pu_kernel=kernels.pu_chunk_numba,
                                 su_kernel=kernels.su_chunk_numba)
        slow = lambda: run_trial(cfg, args.horizon, 0, ss, pu_kernel=kernels.pu_chunk_numpy,
                                 su_kernel=kernels.su_chunk_python)
        run_trial(cfg, 1000, 0, ss, pu_kernel=kernels.pu_chunk_numba, su_kernel=kernels.su_chunk_numba)  # compile
        tf, a = best_of(fast, args.repeat)
        ts, b = best_of(slow, args.repeat)
        same = (a.success, a.cost, a.reward) == (b.success, b.cost, b.reward)
        print(f"{strategy.value:<24}{tf:>10.3f}{ts:>12.3f}{ts / tf:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
