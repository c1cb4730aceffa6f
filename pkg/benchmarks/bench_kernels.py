#!/usr/bin/env python3
"""Benchmark the compiled edit-distance kernel against the pure fallback.

Run after an editable install:

    python3 benchmarks/bench_kernels.py [--pairs N]

The edit-distance inner loop dominates evaluation runs (one call per
benchmark case), which is why it gets the compiled core; everything else
in the pipeline is I/O- or model-bound.
"""

from __future__ import annotations

import argparse
import random
import string
import time

from coderag.kernels import BACKEND, levenshtein, pure_levenshtein


def make_pairs(count: int, length: int, seed: int) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    alphabet = string.ascii_lowercase + " _()."
    out = []
    for _ in range(count):
        a = "".join(rng.choice(alphabet) for _ in range(length))
        b = "".join(rng.choice(alphabet) for _ in range(length))
        out.append((a, b))
    return out


def time_kernel(kernel, pairs) -> float:
    start = time.perf_counter()
    for a, b in pairs:
        kernel(a, b)
    return time.perf_counter() - start


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=200, help="pairs per length")
    args = parser.parse_args()

    if BACKEND != "compiled":
        print("note: compiled kernel not available; both rows use the pure kernel")

    print(f"selected backend: {BACKEND}")
    print(f"{'length':>8} {'pure (s)':>10} {'selected (s)':>13} {'speedup':>9}")
    for length in (16, 64, 256, 1024):
        pairs = make_pairs(args.pairs, length, seed=length)
        for a, b in pairs[:5]:
            assert levenshtein(a, b) == pure_levenshtein(a, b)
        t_pure = time_kernel(pure_levenshtein, pairs)
        t_sel = time_kernel(levenshtein, pairs)
        speedup = t_pure / t_sel if t_sel > 0 else float("inf")
        print(f"{length:>8} {t_pure:>10.4f} {t_sel:>13.4f} {speedup:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
