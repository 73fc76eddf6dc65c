#!/usr/bin/env python3
"""Benchmark the Viterbi decode kernel: numba JIT vs pure numpy.

The numba path is warmed up first so compilation time is excluded.  Both
backends run on identical inputs and must return identical paths.

    python benchmarks/bench_viterbi.py --lengths 10 40 160 --cases 300
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from resume_ner.tagger.viterbi import BACKEND_ENV, HAS_NUMBA, TransitionMask, decode_indices
from resume_ner.textproc import bio_tagset


def run_backend(backend: str, instances, transitions, mask) -> tuple[float, list[int]]:
    os.environ[BACKEND_ENV] = backend
    try:
        started = time.perf_counter()
        checks = []
        for emissions in instances:
            path, _ = decode_indices(emissions, transitions, mask)
            checks.append(int(path[-1]))
        return time.perf_counter() - started, checks
    finally:
        del os.environ[BACKEND_ENV]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lengths", type=int, nargs="+", default=[10, 40, 160, 640])
    parser.add_argument("--cases", type=int, default=300, help="instances per length")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("numba is not importable; nothing to compare")
        return 1

    rng = np.random.default_rng(args.seed)
    tags = bio_tagset()
    mask = TransitionMask.for_tags(tags)
    transitions = rng.normal(size=(len(tags), len(tags)))

    # warm up the JIT outside the timed region
    run_backend("numba", [rng.normal(size=(4, len(tags)))], transitions, mask)

    print(f"{len(tags)} tags, {args.cases} instances per length\n")
    print(f"{'length':>7}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for length in args.lengths:
        instances = [rng.normal(size=(length, len(tags))) for _ in range(args.cases)]
        numpy_time, numpy_checks = run_backend("numpy", instances, transitions, mask)
        numba_time, numba_checks = run_backend("numba", instances, transitions, mask)
        if numpy_checks != numba_checks:
            raise AssertionError(f"backend mismatch at length {length}")
        ratio = numpy_time / numba_time if numba_time else float("inf")
        print(f"{length:>7}  {numpy_time:>9.3f}s  {numba_time:>9.3f}s  {ratio:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
