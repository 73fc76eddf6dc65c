"""Corpus data model: entity spans over resume sections, dataset IO, validation.

A dataset is a list of resumes ("documents"), each split into up to five
typed sections.  Annotations are flat, non-overlapping character-offset
spans over a section's text.  Offsets count Unicode code points, never
bytes, with an inclusive start and exclusive end.

On disk a dataset is a UTF-8, LF-terminated JSONL file: the first line is
a header record carrying the schema version, every following line is one
self-contained document record.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

SCHEMA_VERSION = 1


class EntityType(enum.Enum):
    """The eight entity types this toolkit recognizes.

    The set is closed; definition order is the canonical reporting order.
    """

    CITY = "CITY"
    DATE = "DATE"
    DEGREE = "DEGREE"
    DIPLOMA_MAJOR = "DIPLOMA_MAJOR"
    JOB_TITLE = "JOB_TITLE"
    LANGUAGE = "LANGUAGE"
    COUNTRY = "COUNTRY"
    SKILL = "SKILL"

    @classmethod
    def parse(cls, label: str) -> "EntityType":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown entity type: {label!r}") from None


class SectionKind(enum.Enum):
    """The five resume section kinds. Closed set, at most one per document."""

    PERSONAL = "PERSONAL"
    EDUCATION = "EDUCATION"
    EXPERIENCE = "EXPERIENCE"
    LANGUAGE = "LANGUAGE"
    SKILL = "SKILL"

    @classmethod
    def parse(cls, label: str) -> "SectionKind":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown section kind: {label!r}") from None


class Provenance(enum.Enum):
    """Origin of a span: rule-based seeding, model prediction, or human review."""

    SEED = "SEED"
    MODEL = "MODEL"
    HUMAN = "HUMAN"

    @classmethod
    def parse(cls, label: str) -> "Provenance":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown provenance: {label!r}") from None


class Split(enum.Enum):
    TRAIN = "TRAIN"
    DEV = "DEV"
    TEST = "TEST"

    @classmethod
    def parse(cls, label: str) -> "Split":
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown split: {label!r}") from None


# Person-level split assignment: every doc_id maps to exactly one split.
SplitAssignment = Mapping[str, Split]


@dataclass(frozen=True)
class EntitySpan:
    """Typed character-offset span: [start, end) over the owning section's text."""

    start: int
    end: int
    entity_type: EntityType
    provenance: Provenance = Provenance.HUMAN

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span offsets: start={self.start}, end={self.end}")

    def key(self) -> tuple[int, int, str]:
        """Identity used for exact-match scoring: offsets and type, not provenance."""
        return (self.start, self.end, self.entity_type.value)


@dataclass(frozen=True)
class Section:
    """One resume section: text plus its spans, kept sorted by start offset."""

    section_id: str
    kind: SectionKind
    text: str
    spans: tuple[EntitySpan, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.spans, key=lambda s: (s.start, s.end)))
        object.__setattr__(self, "spans", ordered)

    def with_spans(self, spans: Iterable[EntitySpan]) -> "Section":
        return replace(self, spans=tuple(spans))


@dataclass(frozen=True)
class Document:
    """One resume: a job field plus its sections."""

    doc_id: str
    field: str
    sections: tuple[Section, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sections", tuple(self.sections))

    def span_count(self) -> int:
        return sum(len(s.spans) for s in self.sections)


@dataclass(frozen=True)
class Dataset:
    documents: tuple[Document, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(self.documents))


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_dataset."""

    code: str
    message: str
    doc_id: str | None = None
    section_id: str | None = None


class DatasetFormatError(ValueError):
    """Malformed dataset file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class UnsupportedSchemaError(DatasetFormatError):
    pass


class InvalidDatasetError(ValueError):
    """Dataset parsed but breaks model invariants; carries the violation list."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        lines = "; ".join(v.message for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"{len(violations)} violation(s): {lines}{more}")


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Check every model invariant; returns all violations (empty list = valid)."""
    violations: list[Violation] = []
    seen_docs: set[str] = set()
    seen_sections: set[str] = set()

    for doc in dataset.documents:
        if doc.doc_id in seen_docs:
            violations.append(
                Violation("DUPLICATE_DOC_ID", f"duplicate doc_id {doc.doc_id!r}", doc.doc_id)
            )
        seen_docs.add(doc.doc_id)

        if len(doc.sections) > len(SectionKind):
            violations.append(
                Violation(
                    "TOO_MANY_SECTIONS",
                    f"document {doc.doc_id!r} has {len(doc.sections)} sections",
                    doc.doc_id,
                )
            )
        kinds_seen: set[SectionKind] = set()
        for section in doc.sections:
            if section.kind in kinds_seen:
                violations.append(
                    Violation(
                        "DUPLICATE_SECTION_KIND",
                        f"document {doc.doc_id!r} has two {section.kind.value} sections",
                        doc.doc_id,
                        section.section_id,
                    )
                )
            kinds_seen.add(section.kind)

            if section.section_id in seen_sections:
                violations.append(
                    Violation(
                        "DUPLICATE_SECTION_ID",
                        f"duplicate section_id {section.section_id!r}",
                        doc.doc_id,
                        section.section_id,
                    )
                )
            seen_sections.add(section.section_id)

            violations.extend(
                check_spans(section.spans, len(section.text), doc.doc_id, section.section_id)
            )
    return violations


def check_spans(
    spans: Iterable[EntitySpan],
    text_length: int,
    doc_id: str | None = None,
    section_id: str | None = None,
) -> list[Violation]:
    """Bounds and pairwise-overlap checks for one section's span set."""
    violations: list[Violation] = []
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for span in ordered:
        if span.end > text_length:
            violations.append(
                Violation(
                    "SPAN_OUT_OF_BOUNDS",
                    f"span ({span.start}, {span.end}) exceeds text length {text_length}",
                    doc_id,
                    section_id,
                )
            )
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            violations.append(
                Violation(
                    "SPAN_OVERLAP",
                    f"spans ({prev.start}, {prev.end}) and ({cur.start}, {cur.end}) overlap",
                    doc_id,
                    section_id,
                )
            )
    return violations


def check_assignment(dataset: Dataset, assignment: SplitAssignment) -> None:
    missing = [d.doc_id for d in dataset.documents if d.doc_id not in assignment]
    if missing:
        raise ValueError(f"assignment does not cover doc_ids: {missing[:5]}")


def label_histogram(
    dataset: Dataset, assignment: SplitAssignment, split: Split | str
) -> dict[EntityType, int]:
    """Span counts per entity type over the documents assigned to `split`."""
    split = Split.parse(split) if isinstance(split, str) else split
    check_assignment(dataset, assignment)
    counts = {t: 0 for t in EntityType}
    for doc in dataset.documents:
        if assignment[doc.doc_id] is not split:
            continue
        for section in doc.sections:
            for span in section.spans:
                counts[span.entity_type] += 1
    return counts


def field_histogram(
    dataset: Dataset, assignment: SplitAssignment, split: Split | str
) -> dict[str, int]:
    """Document counts per job field over the documents assigned to `split`."""
    split = Split.parse(split) if isinstance(split, str) else split
    check_assignment(dataset, assignment)
    counts: dict[str, int] = {}
    for doc in dataset.documents:
        if assignment[doc.doc_id] is split:
            counts[doc.field] = counts.get(doc.field, 0) + 1
    return counts


def sections_by_id(dataset: Dataset) -> dict[str, tuple[Document, Section]]:
    index: dict[str, tuple[Document, Section]] = {}
    for doc in dataset.documents:
        for section in doc.sections:
            index[section.section_id] = (doc, section)
    return index


# ---------------------------------------------------------------------------
# Serialization


def span_to_record(span: EntitySpan) -> dict:
    return {
        "start": span.start,
        "end": span.end,
        "type": span.entity_type.value,
        "provenance": span.provenance.value,
    }


def span_from_record(record: dict) -> EntitySpan:
    try:
        start = int(record["start"])
        end = int(record["end"])
        entity_type = EntityType.parse(str(record["type"]))
    except KeyError as e:
        raise ValueError(f"span record missing field {e.args[0]!r}") from None
    provenance = Provenance.parse(str(record.get("provenance", "HUMAN")))
    return EntitySpan(start, end, entity_type, provenance)


def doc_to_record(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "field": doc.field,
        "sections": [
            {
                "section_id": s.section_id,
                "kind": s.kind.value,
                "text": s.text,
                "spans": [span_to_record(sp) for sp in s.spans],
            }
            for s in doc.sections
        ],
    }


def doc_from_record(record: dict) -> Document:
    for key in ("doc_id", "field", "sections"):
        if key not in record:
            raise ValueError(f"document record missing field {key!r}")
    sections = []
    for raw in record["sections"]:
        for key in ("section_id", "kind", "text"):
            if key not in raw:
                raise ValueError(f"section record missing field {key!r}")
        sections.append(
            Section(
                section_id=str(raw["section_id"]),
                kind=SectionKind.parse(str(raw["kind"])),
                text=str(raw["text"]),
                spans=tuple(span_from_record(r) for r in raw.get("spans", [])),
            )
        )
    return Document(doc_id=str(record["doc_id"]), field=str(record["field"]), sections=tuple(sections))


def dataset_to_lines(dataset: Dataset) -> list[str]:
    lines = [json.dumps({"schema_version": dataset.schema_version}, ensure_ascii=False)]
    lines.extend(json.dumps(doc_to_record(d), ensure_ascii=False) for d in dataset.documents)
    return lines


def dataset_to_text(dataset: Dataset) -> str:
    return "".join(line + "\n" for line in dataset_to_lines(dataset))


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(dataset_to_text(dataset), encoding="utf-8", newline="\n")


def dataset_from_lines(lines: Iterable[str], validate: bool = True) -> Dataset:
    documents: list[Document] = []
    version: int | None = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"invalid JSON: {e.msg}", line=lineno) from None
        if not isinstance(record, dict):
            raise DatasetFormatError("record is not an object", line=lineno)
        if version is None:
            if "schema_version" not in record:
                raise DatasetFormatError("first line must be the schema_version header", line=lineno)
            version = int(record["schema_version"])
            if version != SCHEMA_VERSION:
                raise UnsupportedSchemaError(
                    f"unsupported schema_version {version} (supported: {SCHEMA_VERSION})",
                    line=lineno,
                )
            continue
        try:
            documents.append(doc_from_record(record))
        except ValueError as e:
            raise DatasetFormatError(str(e), line=lineno) from None
    if version is None:
        raise DatasetFormatError("empty file: missing schema_version header")
    dataset = Dataset(documents=tuple(documents), schema_version=version)
    if validate:
        violations = validate_dataset(dataset)
        if violations:
            raise InvalidDatasetError(violations)
    return dataset


def read_dataset(path: str | Path, validate: bool = True) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    return dataset_from_lines(text.splitlines(), validate=validate)
