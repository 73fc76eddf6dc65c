"""Entity-level exact-match scoring and aggregate F1 metrics.

A predicted span counts as a true positive iff a gold span in the same
section has identical start, end and type (provenance is ignored).  Scores
are reported on a 0-100 scale.  All aggregation happens in full precision;
rounding (half-up, two decimals) is applied only when rendering.

Confusion counts can also be reconstructed from published precision /
recall / support triples, so external result tables can be cross-checked
without access to raw predictions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import (
    Dataset,
    EntitySpan,
    EntityType,
    Split,
    SplitAssignment,
    check_spans,
    sections_by_id,
    span_from_record,
    span_to_record,
)


def _round_half_up(x: float, digits: int = 0) -> float:
    scale = 10**digits
    return math.floor(x * scale + 0.5) / scale


def format2(x: float) -> str:
    """Render a score rounded half-up to two decimals (95.595 -> "95.60")."""
    return str(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """P/R/F1 percentages from confusion counts; zero denominators score 0."""
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class PerTypeScore:
    entity_type: EntityType
    tp: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        return precision_recall_f1(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return precision_recall_f1(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return precision_recall_f1(self.tp, self.fp, self.fn)[2]


def macro_average(values: Sequence[float]) -> float:
    """Unweighted mean; zero-support entries participate at their face value."""
    return sum(values) / len(values) if values else 0.0


def weighted_average(values: Sequence[float], weights: Sequence[int]) -> float:
    """Support-weighted mean: sum(w * v) / sum(w); 0 when all weights are 0."""
    total = sum(weights)
    if total == 0:
        return 0.0
    return sum(w * v for v, w in zip(values, weights)) / total


def aggregate(per_type: Sequence[PerTypeScore]) -> tuple[float, float, float]:
    """(micro, macro, weighted) F1 over one score per entity type.

    Micro comes from globally summed counts; macro is the unweighted mean of
    per-type F1 over all eight types (zero-support types count as 0);
    weighted is the support-weighted mean.
    """
    seen = [s.entity_type for s in per_type]
    if sorted(seen, key=lambda t: t.value) != sorted(EntityType, key=lambda t: t.value):
        raise ValueError("aggregate needs exactly one score per entity type")
    tp = sum(s.tp for s in per_type)
    fp = sum(s.fp for s in per_type)
    fn = sum(s.fn for s in per_type)
    micro = precision_recall_f1(tp, fp, fn)[2]
    macro = macro_average([s.f1 for s in per_type])
    weighted = weighted_average([s.f1 for s in per_type], [s.support for s in per_type])
    return micro, macro, weighted


@dataclass(frozen=True)
class MetricsReport:
    per_type: tuple[PerTypeScore, ...]
    micro_f1: float
    macro_f1: float
    weighted_f1: float

    @classmethod
    def from_per_type(cls, per_type: Sequence[PerTypeScore]) -> "MetricsReport":
        ordered = tuple(sorted(per_type, key=lambda s: list(EntityType).index(s.entity_type)))
        micro, macro, weighted = aggregate(ordered)
        return cls(ordered, micro, macro, weighted)

    def to_dict(self) -> dict:
        return {
            "per_type": [
                {
                    "type": s.entity_type.value,
                    "tp": s.tp,
                    "fp": s.fp,
                    "fn": s.fn,
                    "support": s.support,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                }
                for s in self.per_type
            ],
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        per_type = [
            PerTypeScore(EntityType.parse(row["type"]), int(row["tp"]), int(row["fp"]), int(row["fn"]))
            for row in data["per_type"]
        ]
        return cls.from_per_type(per_type)


def score_span_pairs(
    pairs: Iterable[tuple[Sequence[EntitySpan], Sequence[EntitySpan]]],
) -> MetricsReport:
    """Score (gold, predicted) span-set pairs by exact (start, end, type) match."""
    tp = {t: 0 for t in EntityType}
    fp = {t: 0 for t in EntityType}
    fn = {t: 0 for t in EntityType}
    for gold, predicted in pairs:
        gold_keys = {s.key() for s in gold}
        pred_keys = {s.key() for s in predicted}
        for s in predicted:
            if s.key() in gold_keys:
                tp[s.entity_type] += 1
            else:
                fp[s.entity_type] += 1
        for s in gold:
            if s.key() not in pred_keys:
                fn[s.entity_type] += 1
    return MetricsReport.from_per_type(
        [PerTypeScore(t, tp[t], fp[t], fn[t]) for t in EntityType]
    )


def score(
    dataset: Dataset,
    assignment: SplitAssignment,
    split: Split | str,
    predictions: Mapping[str, Sequence[EntitySpan]],
) -> MetricsReport:
    """Score predictions (section_id -> spans) against the gold spans of a split.

    Every predicted section must belong to the split; sections of the split
    with no predictions count as all-false-negative.  Overlapping predictions
    within a section are rejected.
    """
    split = Split.parse(split) if isinstance(split, str) else split
    index = sections_by_id(dataset)
    in_split = {
        sid: section
        for sid, (doc, section) in index.items()
        if assignment.get(doc.doc_id) is split
    }
    for sid, spans in predictions.items():
        if sid not in in_split:
            raise ValueError(f"predictions reference unknown section_id {sid!r} for split {split.value}")
        violations = check_spans(spans, len(in_split[sid].text), section_id=sid)
        if violations:
            raise ValueError(f"invalid predictions for section {sid!r}: {violations[0].message}")
    pairs = [
        (section.spans, tuple(predictions.get(sid, ())))
        for sid, section in in_split.items()
    ]
    return score_span_pairs(pairs)


def reconstruct_confusion(precision: float, recall: float, support: int) -> tuple[int, int, int]:
    """Invert published (precision, recall, support) into (tp, fp, fn).

    tp = round(recall * support / 100); fp from the precision ratio (0 when
    precision is 100).  Raises if re-deriving P/R from the counts does not
    reproduce the inputs to two decimals (tolerance 0.005 for inputs printed
    with fewer decimals).
    """
    if not (0 <= precision <= 100 and 0 <= recall <= 100):
        raise ValueError("precision and recall must be in [0, 100]")
    if support <= 0:
        raise ValueError("support must be positive")
    tp = int(_round_half_up(recall * support / 100.0))
    if precision >= 100.0 or tp == 0:
        fp = 0
    else:
        fp = int(_round_half_up(tp * 100.0 / precision - tp))
    fn = support - tp
    re_p, re_r, _ = precision_recall_f1(tp, fp, fn)
    if abs(_round_half_up(re_p, 2) - precision) > 0.005 or abs(_round_half_up(re_r, 2) - recall) > 0.005:
        raise ValueError(
            f"inconsistent inputs: reconstructed counts give P={re_p:.4f}, R={re_r:.4f} "
            f"for stated P={precision}, R={recall}, support={support}"
        )
    return tp, fp, fn


# ---------------------------------------------------------------------------
# Predictions file: one JSONL record per span {section_id, start, end, type}


class PredictionsFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


def predictions_from_lines(lines: Iterable[str]) -> dict[str, list[EntitySpan]]:
    predictions: dict[str, list[EntitySpan]] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise PredictionsFormatError(f"invalid JSON: {e.msg}", line=lineno) from None
        if not isinstance(record, dict) or "section_id" not in record:
            raise PredictionsFormatError("record must be an object with a section_id", line=lineno)
        try:
            span = span_from_record({**record, "provenance": record.get("provenance", "MODEL")})
        except ValueError as e:
            raise PredictionsFormatError(str(e), line=lineno) from None
        predictions.setdefault(str(record["section_id"]), []).append(span)
    return predictions


def predictions_to_lines(predictions: Mapping[str, Sequence[EntitySpan]]) -> list[str]:
    lines = []
    for sid, spans in predictions.items():
        for span in spans:
            record = {"section_id": sid, **span_to_record(span)}
            del record["provenance"]
            lines.append(json.dumps(record, ensure_ascii=False))
    return lines


def read_predictions(path: str | Path) -> dict[str, list[EntitySpan]]:
    text = Path(path).read_text(encoding="utf-8")
    return predictions_from_lines(text.splitlines())


def write_predictions(predictions: Mapping[str, Sequence[EntitySpan]], path: str | Path) -> None:
    content = "".join(line + "\n" for line in predictions_to_lines(predictions))
    Path(path).write_text(content, encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Rendering

_TYPE_COL = max(len(t.value) for t in EntityType)


def render_report(report: MetricsReport, style: str = "per-type", name: str = "model") -> str:
    """Fixed-layout text table; values rounded half-up to two decimals.

    "per-type" lists one row per entity type (canonical order) plus the three
    aggregates; "model-comparison" is the one-line micro/macro/weighted view.
    """
    if style == "per-type":
        lines = [f"{'Entity Type':<{_TYPE_COL}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}"]
        for s in report.per_type:
            lines.append(
                f"{s.entity_type.value:<{_TYPE_COL}}  {format2(s.precision):>9}  "
                f"{format2(s.recall):>9}  {format2(s.f1):>9}"
            )
        lines.append("")
        lines.append(f"{'Micro F1':<{_TYPE_COL}}  {format2(report.micro_f1):>9}")
        lines.append(f"{'Macro F1':<{_TYPE_COL}}  {format2(report.macro_f1):>9}")
        lines.append(f"{'Weighted F1':<{_TYPE_COL}}  {format2(report.weighted_f1):>9}")
        return "\n".join(lines) + "\n"
    if style == "model-comparison":
        width = max(len(name), len("Model"))
        lines = [
            f"{'Model':<{width}}  {'Micro F1':>9}  {'Macro F1':>9}  {'Weighted F1':>11}",
            f"{name:<{width}}  {format2(report.micro_f1):>9}  {format2(report.macro_f1):>9}  "
            f"{format2(report.weighted_f1):>11}",
        ]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report style: {style!r}")
