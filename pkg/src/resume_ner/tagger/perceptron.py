"""Averaged structured perceptron over BIO tags with early stopping.

Training decodes each example with the current weights and, on a mistake,
adds the gold features and subtracts the predicted ones (same for tag
transition pairs).  After every epoch the dev set is scored with the model
snapshot that would be returned (averaged when configured); training stops
once dev micro F1 has not improved for `patience` consecutive epochs, and
the snapshot from the best epoch is returned.

Runs are bit-reproducible for a fixed (data, config) pair: epoch order is
shuffled by a dedicated RNG, and all tie-breaking is lexicographic.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..corpus import EntitySpan, Provenance, Section, SectionKind
from ..evaluation import score_span_pairs
from ..textproc import Token, bio_tagset, spans_to_tags, tags_to_spans, tokenize
from .features import extract_features
from .viterbi import TransitionMask, decode_indices

MAGIC = "resume-ner-tagger"
FORMAT_VERSION = 1

# (tokens, BIO tags, section kind)
Example = tuple[Sequence[Token], Sequence[str], SectionKind]


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    averaging: bool = True

    def __post_init__(self) -> None:
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_position_errors: int
    dev_f1: float


@dataclass(frozen=True)
class TrainingLog:
    records: tuple[EpochRecord, ...]
    best_epoch: int
    best_dev_f1: float
    stopped_early: bool

    @property
    def epochs_run(self) -> int:
        return len(self.records)

    def dev_f1_history(self) -> list[float]:
        return [r.dev_f1 for r in self.records]


class ModelFormatError(ValueError):
    pass


class UnsupportedModelVersion(ModelFormatError):
    pass


@dataclass
class TaggerModel:
    tags: tuple[str, ...]
    feature_weights: dict[str, np.ndarray]  # feature -> per-tag weights
    transitions: np.ndarray  # (T, T)
    mask: TransitionMask
    meta: dict = field(default_factory=dict)

    def emissions(self, features_per_position: Sequence[Sequence[str]]) -> np.ndarray:
        scores = np.zeros((len(features_per_position), len(self.tags)))
        for i, feats in enumerate(features_per_position):
            row = scores[i]
            for feat in feats:
                weights = self.feature_weights.get(feat)
                if weights is not None:
                    row += weights
        return scores

    def decode(self, tokens: Sequence[Token], kind: SectionKind) -> list[str]:
        if not tokens:
            return []
        feats = [extract_features(list(tokens), i, kind) for i in range(len(tokens))]
        path, _ = decode_indices(self.emissions(feats), self.transitions, self.mask)
        return [self.tags[i] for i in path]


def predict(model: TaggerModel, section: Section) -> list[EntitySpan]:
    """Tag one section; spans carry MODEL provenance and pass span invariants."""
    tokens = tokenize(section.text)
    tags = model.decode(tokens, section.kind)
    return tags_to_spans(tokens, tags, provenance=Provenance.MODEL)


def make_example(section: Section, spans: Iterable[EntitySpan] | None = None) -> Example:
    """Turn a section (or section + span override) into a training example."""
    tokens = tokenize(section.text)
    chosen = tuple(section.spans if spans is None else spans)
    tags, _ = spans_to_tags(tokens, chosen)
    return tokens, tags, section.kind


class _Averaged:
    """Perceptron weights with lazily-accumulated averages."""

    def __init__(self, n_tags: int):
        self.n_tags = n_tags
        self.weights: dict[str, np.ndarray] = {}
        self.totals: dict[str, np.ndarray] = {}
        self.stamps: dict[str, np.ndarray] = {}
        self.trans = np.zeros((n_tags, n_tags))
        self.trans_totals = np.zeros((n_tags, n_tags))
        self.trans_stamps = np.zeros((n_tags, n_tags), dtype=np.int64)

    def _entry(self, feat: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if feat not in self.weights:
            self.weights[feat] = np.zeros(self.n_tags)
            self.totals[feat] = np.zeros(self.n_tags)
            self.stamps[feat] = np.zeros(self.n_tags, dtype=np.int64)
        return self.weights[feat], self.totals[feat], self.stamps[feat]

    def bump_feature(self, feat: str, tag: int, delta: float, step: int) -> None:
        weights, totals, stamps = self._entry(feat)
        totals[tag] += (step - stamps[tag]) * weights[tag]
        stamps[tag] = step
        weights[tag] += delta

    def bump_transition(self, prev: int, cur: int, delta: float, step: int) -> None:
        self.trans_totals[prev, cur] += (step - self.trans_stamps[prev, cur]) * self.trans[prev, cur]
        self.trans_stamps[prev, cur] = step
        self.trans[prev, cur] += delta

    def snapshot(self, step: int, averaged: bool) -> tuple[dict[str, np.ndarray], np.ndarray]:
        if not averaged or step == 0:
            return (
                {feat: w.copy() for feat, w in self.weights.items()},
                self.trans.copy(),
            )
        features = {
            feat: (self.totals[feat] + (step - self.stamps[feat]) * w) / step
            for feat, w in self.weights.items()
        }
        trans = (self.trans_totals + (step - self.trans_stamps) * self.trans) / step
        return features, trans


def train(
    train_set: Sequence[Example],
    dev_set: Sequence[Example],
    config: TrainConfig = TrainConfig(),
) -> tuple[TaggerModel, TrainingLog]:
    """Fit the tagger; returns the best-dev-epoch snapshot and the epoch log."""
    if not train_set:
        raise ValueError("train_set must not be empty")
    if not dev_set:
        raise ValueError("dev_set must not be empty")
    tags = bio_tagset()
    tag_index = {t: i for i, t in enumerate(tags)}
    for tokens, gold, _ in list(train_set) + list(dev_set):
        if len(tokens) != len(gold):
            raise ValueError("example has mismatched token/tag lengths")
        unknown = [t for t in gold if t not in tag_index]
        if unknown:
            raise ValueError(f"tag outside the model label set: {unknown[0]!r}")

    mask = TransitionMask.for_tags(tags)
    state = _Averaged(len(tags))
    cached = [
        (
            [extract_features(list(tokens), i, kind) for i in range(len(tokens))],
            np.array([tag_index[t] for t in gold], dtype=np.int64),
        )
        for tokens, gold, kind in train_set
    ]
    rng = random.Random(config.seed)
    step = 0
    records: list[EpochRecord] = []
    best: tuple[float, int, TaggerModel] | None = None  # (f1, epoch, snapshot)

    for epoch in range(1, config.max_epochs + 1):
        order = list(range(len(cached)))
        rng.shuffle(order)
        position_errors = 0
        for idx in order:
            feats, gold = cached[idx]
            step += 1
            if len(gold) == 0:
                continue
            emissions = np.zeros((len(gold), len(tags)))
            for i, per_pos in enumerate(feats):
                row = emissions[i]
                for feat in per_pos:
                    weights = state.weights.get(feat)
                    if weights is not None:
                        row += weights
            path, _ = decode_indices(emissions, state.trans, mask)
            if np.array_equal(path, gold):
                continue
            for i, (g, p) in enumerate(zip(gold, path)):
                if g == p:
                    continue
                position_errors += 1
                for feat in feats[i]:
                    state.bump_feature(feat, int(g), +1.0, step)
                    state.bump_feature(feat, int(p), -1.0, step)
            for i in range(1, len(gold)):
                gold_pair = (int(gold[i - 1]), int(gold[i]))
                pred_pair = (int(path[i - 1]), int(path[i]))
                if gold_pair != pred_pair:
                    state.bump_transition(*gold_pair, +1.0, step)
                    state.bump_transition(*pred_pair, -1.0, step)

        feature_weights, transitions = state.snapshot(step, config.averaging)
        candidate = TaggerModel(tags, feature_weights, transitions, mask)
        dev_f1 = _dev_micro_f1(candidate, dev_set)
        records.append(EpochRecord(epoch, position_errors, dev_f1))

        if best is None or dev_f1 > best[0]:
            best = (dev_f1, epoch, candidate)
        elif epoch - best[1] >= config.patience:
            break

    dev_f1_best, best_epoch, model = best
    model.meta = {
        "epochs_run": len(records),
        "best_epoch": best_epoch,
        "best_dev_f1": dev_f1_best,
        "dev_f1_history": [r.dev_f1 for r in records],
        "seed": config.seed,
        "averaging": config.averaging,
    }
    log = TrainingLog(
        records=tuple(records),
        best_epoch=best_epoch,
        best_dev_f1=dev_f1_best,
        stopped_early=len(records) < config.max_epochs,
    )
    return model, log


def _dev_micro_f1(model: TaggerModel, dev_set: Sequence[Example]) -> float:
    pairs = []
    for tokens, gold_tags, kind in dev_set:
        tokens = list(tokens)
        predicted = model.decode(tokens, kind)
        pairs.append(
            (tags_to_spans(tokens, list(gold_tags)), tags_to_spans(tokens, predicted))
        )
    return score_span_pairs(pairs).micro_f1


# ---------------------------------------------------------------------------
# Model file: "<magic> v<version>" header line, then one JSON object


def save_model(model: TaggerModel, path: str | Path) -> None:
    payload = {
        "tags": list(model.tags),
        "transitions": model.transitions.tolist(),
        "features": {feat: w.tolist() for feat, w in model.feature_weights.items()},
        "meta": model.meta,
    }
    content = f"{MAGIC} v{FORMAT_VERSION}\n" + json.dumps(payload, ensure_ascii=False) + "\n"
    Path(path).write_text(content, encoding="utf-8", newline="\n")


def load_model(path: str | Path) -> TaggerModel:
    text = Path(path).read_text(encoding="utf-8")
    header, _, body = text.partition("\n")
    parts = header.split()
    if len(parts) != 2 or parts[0] != MAGIC or not parts[1].startswith("v"):
        raise ModelFormatError(f"bad magic header: {header[:60]!r}")
    version = parts[1][1:]
    if version != str(FORMAT_VERSION):
        raise UnsupportedModelVersion(
            f"unsupported model format version {version} (supported: {FORMAT_VERSION})"
        )
    try:
        payload = json.loads(body)
        tags = tuple(str(t) for t in payload["tags"])
        transitions = np.array(payload["transitions"], dtype=np.float64)
        features = {
            str(feat): np.array(w, dtype=np.float64) for feat, w in payload["features"].items()
        }
        meta = dict(payload.get("meta", {}))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"corrupt model file: {e}") from None
    if transitions.shape != (len(tags), len(tags)):
        raise ModelFormatError("transition matrix does not match the tag set")
    return TaggerModel(tags, features, transitions, TransitionMask.for_tags(tags), meta)
