"""Person-level stratified train/dev/test splitting.

Whole documents are assigned (sections never straddle splits).  Split sizes
follow the ratios under largest-remainder rounding with a fixed tie order
(train, dev, test).  Balance across strata - the eight entity types plus the
job fields - is optimized by a randomized greedy pass repeated over several
restarts; the assignment with the lowest imbalance score wins.

The imbalance score sums, over splits s and strata k,
``weight_k * |count_k(s) / count_k(total) - ratio_s|``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable

import numpy as np

from .corpus import Dataset, Document, Split, SplitAssignment

_SPLIT_ORDER = (Split.TRAIN, Split.DEV, Split.TEST)


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0
    weight_labels: float = 1.0
    weight_fields: float = 1.0
    restarts: int = 16

    def __post_init__(self) -> None:
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ValueError("ratios must be three non-negative fractions")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {sum(self.ratios)}")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")
        if self.weight_labels < 0 or self.weight_fields < 0:
            raise ValueError("stratum weights must be non-negative")

    def to_dict(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "seed": self.seed,
            "weight_labels": self.weight_labels,
            "weight_fields": self.weight_fields,
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SplitConfig":
        return cls(
            ratios=tuple(data.get("ratios", (0.70, 0.15, 0.15))),
            seed=int(data.get("seed", 0)),
            weight_labels=float(data.get("weight_labels", 1.0)),
            weight_fields=float(data.get("weight_fields", 1.0)),
            restarts=int(data.get("restarts", 16)),
        )


def largest_remainder_sizes(total: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Integer split sizes: floor each target, then hand out leftover seats by
    largest fractional part, ties resolved in train, dev, test order."""
    targets = [total * r for r in ratios]
    sizes = [int(t) for t in targets]
    leftover = total - sum(sizes)
    by_fraction = sorted(range(3), key=lambda i: (-(targets[i] - sizes[i]), i))
    for i in range(leftover):
        sizes[by_fraction[i]] += 1
    return tuple(sizes)


def _doc_strata(doc: Document) -> dict[Hashable, int]:
    strata: dict[Hashable, int] = {("field", doc.field): 1}
    for section in doc.sections:
        for span in section.spans:
            key = ("label", span.entity_type)
            strata[key] = strata.get(key, 0) + 1
    return strata


class _Balance:
    """Incremental imbalance bookkeeping over (stratum, split) counts."""

    def __init__(self, totals: dict[Hashable, int], weights: dict[Hashable, float], ratios):
        self.totals = totals
        self.weights = weights
        self.ratios = dict(zip(_SPLIT_ORDER, ratios))
        self.counts: dict[Hashable, dict[Split, int]] = {
            k: {s: 0 for s in _SPLIT_ORDER} for k in totals
        }

    def _term(self, stratum: Hashable, split: Split, count: int) -> float:
        total = self.totals[stratum]
        if total == 0:
            return 0.0
        return self.weights[stratum] * abs(count / total - self.ratios[split])

    def delta(self, strata: dict[Hashable, int], split: Split) -> float:
        change = 0.0
        for stratum, n in strata.items():
            current = self.counts[stratum][split]
            change += self._term(stratum, split, current + n) - self._term(stratum, split, current)
        return change

    def add(self, strata: dict[Hashable, int], split: Split) -> None:
        for stratum, n in strata.items():
            self.counts[stratum][split] += n


    def score(self) -> float:
        return sum(
            self._term(stratum, split, per_split[split])
            for stratum, per_split in self.counts.items()
            for split in _SPLIT_ORDER
        )


def imbalance_score(dataset: Dataset, assignment: SplitAssignment, config: SplitConfig) -> float:
    """Score an arbitrary assignment under the config's weights and ratios."""
    profiles = {doc.doc_id: _doc_strata(doc) for doc in dataset.documents}
    totals, weights = _stratum_totals(profiles, config)
    balance = _Balance(totals, weights, config.ratios)
    for doc in dataset.documents:
        balance.add(profiles[doc.doc_id], assignment[doc.doc_id])
    return balance.score()


def _stratum_totals(profiles: dict[str, dict[Hashable, int]], config: SplitConfig):
    totals: dict[Hashable, int] = {}
    for strata in profiles.values():
        for stratum, n in strata.items():
            totals[stratum] = totals.get(stratum, 0) + n
    weights = {
        stratum: config.weight_labels if stratum[0] == "label" else config.weight_fields
        for stratum in totals
    }
    return totals, weights


def stratified_split(dataset: Dataset, config: SplitConfig) -> tuple[dict[str, Split], float]:
    """Assign whole documents to train/dev/test; returns (assignment, score).

    Deterministic for a fixed (dataset, config): each restart shuffles with
    its own derived seed, orders documents by descending span count, greedily
    assigns each to the split with the smallest marginal imbalance increase
    (subject to the largest-remainder size caps), then runs size-preserving
    pair-swap refinement until no swap lowers the score.  The best-scoring
    restart wins (earliest restart on ties).
    """
    docs = list(dataset.documents)
    if not docs:
        raise ValueError("cannot split an empty dataset")
    caps = dict(zip(_SPLIT_ORDER, largest_remainder_sizes(len(docs), config.ratios)))
    profiles = {doc.doc_id: _doc_strata(doc) for doc in docs}
    totals, weights = _stratum_totals(profiles, config)

    # dense stratum matrix for the refinement kernel
    strata_keys = sorted(totals, key=repr)
    key_index = {k: i for i, k in enumerate(strata_keys)}
    doc_mat = np.zeros((len(docs), len(strata_keys)))
    for row, doc in enumerate(docs):
        for stratum, n in profiles[doc.doc_id].items():
            doc_mat[row, key_index[stratum]] = n
    totals_vec = np.array([totals[k] for k in strata_keys], dtype=np.float64)
    weights_vec = np.array([weights[k] for k in strata_keys], dtype=np.float64)

    best: tuple[float, int, dict[str, Split]] | None = None
    for restart in range(config.restarts):
        rng = random.Random(f"{config.seed}:{restart}")
        order = list(docs)
        rng.shuffle(order)
        order.sort(key=lambda d: -d.span_count())  # stable: shuffle breaks ties

        balance = _Balance(totals, weights, config.ratios)
        filled = {s: 0 for s in _SPLIT_ORDER}
        assignment: dict[str, Split] = {}
        for doc in order:
            candidates = [s for s in _SPLIT_ORDER if filled[s] < caps[s]]
            chosen = min(candidates, key=lambda s: (balance.delta(profiles[doc.doc_id], s), _SPLIT_ORDER.index(s)))
            assignment[doc.doc_id] = chosen
            filled[chosen] += 1
            balance.add(profiles[doc.doc_id], chosen)

        assignment, run_score = _refine(
            [d.doc_id for d in docs], doc_mat, weights_vec, totals_vec, config.ratios, assignment
        )
        if best is None or run_score < best[0]:
            best = (run_score, restart, assignment)

    score, _, assignment = best
    return {doc.doc_id: assignment[doc.doc_id] for doc in docs}, score


def _refine(
    doc_ids: list[str],
    doc_mat: np.ndarray,
    weights: np.ndarray,
    totals: np.ndarray,
    ratios: tuple[float, float, float],
    assignment: dict[str, Split],
    max_rounds: int = 60,
) -> tuple[dict[str, Split], float]:
    """Size-preserving pair-swap descent on the imbalance score.

    Each round scores every cross-split document swap in one vectorized pass,
    then applies non-conflicting improving swaps steepest-first (re-verified
    against the updated counts, so the score strictly decreases).  Fixed
    iteration and tie order keep the result deterministic.
    """
    ratio_vec = np.asarray(ratios)
    safe_totals = np.where(totals > 0, totals, 1.0)
    live_weights = np.where(totals > 0, weights, 0.0)
    split_of = np.array([_SPLIT_ORDER.index(assignment[d]) for d in doc_ids])
    counts = np.zeros((doc_mat.shape[1], 3))
    for s in range(3):
        counts[:, s] = doc_mat[split_of == s].sum(axis=0)

    def term(c: np.ndarray, s: int) -> np.ndarray:
        return (live_weights * np.abs(c / safe_totals - ratio_vec[s])).sum(axis=-1)

    for _ in range(max_rounds):
        candidates: list[tuple[float, int, int]] = []
        for s1 in range(3):
            for s2 in range(s1 + 1, 3):
                left = np.flatnonzero(split_of == s1)
                right = np.flatnonzero(split_of == s2)
                if left.size == 0 or right.size == 0:
                    continue
                diff = doc_mat[right][None, :, :] - doc_mat[left][:, None, :]
                current = term(counts[:, s1], s1) + term(counts[:, s2], s2)
                updated = term(counts[:, s1][None, None, :] + diff, s1) + term(
                    counts[:, s2][None, None, :] - diff, s2
                )
                gain = updated - current
                ii, jj = np.nonzero(gain < -1e-12)
                candidates.extend(
                    (float(gain[i, j]), int(left[i]), int(right[j]))
                    for i, j in zip(ii.tolist(), jj.tolist())
                )
        if not candidates:
            break
        candidates.sort()
        used: set[int] = set()
        applied = False
        for _, i, j in candidates:
            if i in used or j in used:
                continue
            s1, s2 = int(split_of[i]), int(split_of[j])
            diff = doc_mat[j] - doc_mat[i]
            current = term(counts[:, s1], s1) + term(counts[:, s2], s2)
            updated = term(counts[:, s1] + diff, s1) + term(counts[:, s2] - diff, s2)
            if updated - current < -1e-12:
                counts[:, s1] += diff
                counts[:, s2] -= diff
                split_of[i], split_of[j] = s2, s1
                used.update((i, j))
                applied = True
        if not applied:
            break

    score = float(sum(term(counts[:, s], s) for s in range(3)))
    return {doc_ids[i]: _SPLIT_ORDER[int(split_of[i])] for i in range(len(doc_ids))}, score


# ---------------------------------------------------------------------------
# Assignment file: one JSONL record per document {doc_id, split}


def assignment_to_lines(assignment: SplitAssignment) -> list[str]:
    return [
        json.dumps({"doc_id": doc_id, "split": split.value}, ensure_ascii=False)
        for doc_id, split in assignment.items()
    ]


def assignment_from_lines(lines) -> dict[str, Split]:
    assignment: dict[str, Split] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            doc_id = str(record["doc_id"])
            split = Split.parse(str(record["split"]))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise ValueError(f"line {lineno}: bad assignment record: {e}") from None
        if doc_id in assignment:
            raise ValueError(f"line {lineno}: duplicate doc_id {doc_id!r}")
        assignment[doc_id] = split
    return assignment


def write_assignment(assignment: SplitAssignment, path: str | Path) -> None:
    content = "".join(line + "\n" for line in assignment_to_lines(assignment))
    Path(path).write_text(content, encoding="utf-8", newline="\n")


def read_assignment(path: str | Path) -> dict[str, Split]:
    return assignment_from_lines(Path(path).read_text(encoding="utf-8").splitlines())
