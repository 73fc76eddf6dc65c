"""Max-sum decoding of the best legal BIO tag sequence.

The dynamic program runs backward over suffix scores and reconstructs the
path forward, always taking the lowest tag index that attains the maximum.
With the tag list sorted lexicographically this makes the decoder return the
lexicographically smallest maximum-scoring sequence, so ties are stable
across runs and backends.

Decoding dominates training time (one decode per example per epoch), so the
inner loops are compiled with numba when available.  Set
``RESUME_NER_BACKEND=numpy`` to force the vectorized pure-numpy path;
``benchmarks/bench_viterbi.py`` compares the two.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..textproc import OUTSIDE, split_tag

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

BACKEND_ENV = "RESUME_NER_BACKEND"


def active_backend() -> str:
    """Resolve the decode backend: the env override, else numba when importable."""
    choice = os.environ.get(BACKEND_ENV, "").strip().lower()
    if choice:
        if choice not in ("numba", "numpy"):
            raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {choice!r}")
        if choice == "numba" and not HAS_NUMBA:
            raise ValueError(f"{BACKEND_ENV}=numba but numba is not importable")
        return choice
    return "numba" if HAS_NUMBA else "numpy"


@dataclass(frozen=True)
class TransitionMask:
    """Legality of tag transitions: O never precedes I-X, and I-X only follows
    B-X or I-X; no sequence may start inside a span."""

    tags: tuple[str, ...]
    allowed: np.ndarray  # (T, T) bool, [prev, cur]
    start_allowed: np.ndarray  # (T,) bool

    @classmethod
    def for_tags(cls, tags: tuple[str, ...]) -> "TransitionMask":
        parsed = [split_tag(t) for t in tags]
        n = len(tags)
        allowed = np.ones((n, n), dtype=np.bool_)
        start_allowed = np.ones(n, dtype=np.bool_)
        for j, (prefix_j, type_j) in enumerate(parsed):
            if prefix_j != "I":
                continue
            start_allowed[j] = False
            for i, (prefix_i, type_i) in enumerate(parsed):
                if prefix_i == OUTSIDE or type_i is not type_j:
                    allowed[i, j] = False
        return cls(tuple(tags), allowed, start_allowed)

    def violations(self, indices: np.ndarray) -> int:
        """Count illegal transitions in a decoded index path (0 when legal)."""
        bad = 0 if self.start_allowed[indices[0]] else 1
        for prev, cur in zip(indices[:-1], indices[1:]):
            if not self.allowed[prev, cur]:
                bad += 1
        return bad


def _decode_numpy(emissions, transitions, allowed, start_allowed):
    n, t = emissions.shape
    suffix = np.empty((n, t), dtype=np.float64)
    suffix[n - 1] = emissions[n - 1]
    masked_neg = np.where(allowed, 0.0, -np.inf)
    for i in range(n - 2, -1, -1):
        step = transitions + masked_neg + suffix[i + 1][np.newaxis, :]
        suffix[i] = emissions[i] + step.max(axis=1)
    first = np.where(start_allowed, suffix[0], -np.inf)
    path = np.empty(n, dtype=np.int64)
    path[0] = int(np.argmax(first))
    score = float(first[path[0]])
    for i in range(1, n):
        prev = path[i - 1]
        step = np.where(allowed[prev], transitions[prev] + suffix[i], -np.inf)
        path[i] = int(np.argmax(step))
    return path, score


def _decode_loops(emissions, transitions, allowed, start_allowed):
    n, t = emissions.shape
    suffix = np.empty((n, t), dtype=np.float64)
    for j in range(t):
        suffix[n - 1, j] = emissions[n - 1, j]
    for i in range(n - 2, -1, -1):
        for j in range(t):
            best = -np.inf
            for k in range(t):
                if allowed[j, k]:
                    value = transitions[j, k] + suffix[i + 1, k]
                    if value > best:
                        best = value
            suffix[i, j] = emissions[i, j] + best
    path = np.empty(n, dtype=np.int64)
    best = -np.inf
    first = 0
    for j in range(t):
        if start_allowed[j] and suffix[0, j] > best:
            best = suffix[0, j]
            first = j
    path[0] = first
    score = best
    for i in range(1, n):
        prev = path[i - 1]
        best = -np.inf
        cur = 0
        for k in range(t):
            if allowed[prev, k]:
                value = transitions[prev, k] + suffix[i, k]
                if value > best:
                    best = value
                    cur = k
        path[i] = cur
    return path, score


if HAS_NUMBA:
    _decode_numba = njit(cache=True)(_decode_loops)


def decode_indices(
    emissions: np.ndarray, transitions: np.ndarray, mask: TransitionMask
) -> tuple[np.ndarray, float]:
    """Best legal path as tag indices, plus its score."""
    emissions = np.ascontiguousarray(emissions, dtype=np.float64)
    transitions = np.ascontiguousarray(transitions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] == 0:
        raise ValueError("emissions must be a non-empty (positions x tags) matrix")
    t = len(mask.tags)
    if emissions.shape[1] != t or transitions.shape != (t, t):
        raise ValueError(
            f"dimension mismatch: emissions {emissions.shape}, transitions "
            f"{transitions.shape}, {t} tags"
        )
    if active_backend() == "numba":
        return _decode_numba(emissions, transitions, mask.allowed, mask.start_allowed)
    return _decode_numpy(emissions, transitions, mask.allowed, mask.start_allowed)


def viterbi_decode(
    emissions: np.ndarray, transitions: np.ndarray, mask: TransitionMask
) -> tuple[list[str], float]:
    """Best legal tag sequence for an emission score matrix."""
    path, score = decode_indices(emissions, transitions, mask)
    return [mask.tags[i] for i in path], score
