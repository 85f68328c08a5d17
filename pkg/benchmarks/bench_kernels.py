"""Time the numba and numpy versions of the timestamp-column kernels.

    python3 benchmarks/bench_kernels.py [--rows 1000000] [--repeat 20]

Both paths are checked for equal output before timing.  JIT compilation is
triggered up front and not counted.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from bitegra import _kernels as K
from bitegra.chronos import POS_INF


def columns(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    tx_s = np.sort(rng.integers(0, 10**9, n))
    tx_e = np.where(rng.random(n) < 0.3, np.int64(POS_INF), tx_s + rng.integers(1, 10**7, n))
    val_s = rng.integers(-10**9, 10**9, n)
    val_e = val_s + rng.integers(1, 10**8, n)
    return tx_s, tx_e, val_s, val_e


def cases(n: int):
    tx_s, tx_e, val_s, val_e = columns(n)
    lo, hi = 4 * 10**8, 4 * 10**8 + 1
    # overlap_pairs is quadratic per group; keep groups small
    g = np.sort(np.random.default_rng(1).integers(0, max(n // 8, 1), n))
    m = min(n, 100_000)
    return {
        "window_mask": lambda nb: K.window_mask(tx_s, tx_e, lo, hi, use_numba=nb),
        "bitemporal_mask": lambda nb: K.bitemporal_mask(tx_s, tx_e, lo, hi, val_s, val_e, 0, 10**8,
                                                        use_numba=nb),
        "horizon_ends": lambda nb: K.horizon_ends(tx_s, tx_e, 5 * 10**8, use_numba=nb),
        f"overlap_pairs[{m}]": lambda nb: K.overlap_pairs(g[:m], tx_s[:m], tx_e[:m], val_s[:m], val_e[:m],
                                                          use_numba=nb),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    K.warmup()
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, fn in cases(args.rows).items():
        assert np.array_equal(fn(True), fn(False)), name
        reps = max(1, args.repeat // 10) if name.startswith("overlap") else args.repeat
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=reps)) * 1e3
        t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=reps)) * 1e3
        print(f"{name:<24}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
