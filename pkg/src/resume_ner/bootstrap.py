"""Four-stage semi-automatic annotation loop as an explicit state machine.

A project walks CREATED -> SEED_ANNOTATED -> REVIEW1_IN_PROGRESS ->
REVIEW1_DONE -> MODEL_TRAINED -> MODEL_ANNOTATED -> REVIEW2_IN_PROGRESS ->
FINALIZED: a small seed subset is machine-annotated with gazetteer rules,
a human corrects it, a tagger trained on those corrections pre-annotates
everything, and a second human pass yields the gold corpus.

Every successful mutating operation appends one event (with its full
payload and a content digest) to an append-only log; replaying the log
against the stored dataset reconstructs the project state exactly.  All
validation happens before an event is created, so failed operations leave
both the in-memory project and the on-disk directory untouched.
"""

from __future__ import annotations

import datetime as _dt
import enum
import hashlib
import json
import math
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import (
    Dataset,
    EntitySpan,
    EntityType,
    InvalidDatasetError,
    Provenance,
    Section,
    Split,
    check_spans,
    dataset_to_text,
    read_dataset,
    span_from_record,
    span_to_record,
    validate_dataset,
    write_dataset,
)
from .splitter import SplitConfig, stratified_split
from .tagger import TaggerModel, TrainConfig, load_model, make_example, predict, save_model, train
from .tagger.seeds import seed_preannotate

DEV_CARVE_FRACTION = 0.15


class ProjectState(enum.Enum):
    CREATED = "CREATED"
    SEED_ANNOTATED = "SEED_ANNOTATED"
    REVIEW1_IN_PROGRESS = "REVIEW1_IN_PROGRESS"
    REVIEW1_DONE = "REVIEW1_DONE"
    MODEL_TRAINED = "MODEL_TRAINED"
    MODEL_ANNOTATED = "MODEL_ANNOTATED"
    REVIEW2_IN_PROGRESS = "REVIEW2_IN_PROGRESS"
    FINALIZED = "FINALIZED"


class ReviewStatus(enum.Enum):
    PENDING = "PENDING"
    DONE = "DONE"


class StateViolationError(RuntimeError):
    """Operation not allowed in the project's current state."""


class VersionConflictError(RuntimeError):
    """Stale revision token on a review submission."""


class ReviewNotFoundError(LookupError):
    """No review item for the given section in the active pass."""


class InvalidSpansError(ValueError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(v.message for v in violations))


@dataclass
class ReviewItem:
    section_id: str
    pass_no: int
    proposals: tuple[EntitySpan, ...]
    status: ReviewStatus = ReviewStatus.PENDING
    reviewed: tuple[EntitySpan, ...] | None = None
    revision: int = 0


@dataclass(frozen=True)
class ProjectConfig:
    project_id: str
    seed: int = 0
    seed_fraction: float = 0.2
    split: SplitConfig = field(default_factory=SplitConfig)

    def __post_init__(self) -> None:
        if not self.project_id:
            raise ValueError("project_id must be non-empty")
        if not (0 < self.seed_fraction <= 1):
            raise ValueError("seed_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "seed": self.seed,
            "seed_fraction": self.seed_fraction,
            "split": self.split.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectConfig":
        return cls(
            project_id=str(data["project_id"]),
            seed=int(data.get("seed", 0)),
            seed_fraction=float(data.get("seed_fraction", 0.2)),
            split=SplitConfig.from_dict(data.get("split", {})),
        )


@dataclass(frozen=True)
class Event:
    seq: int
    ts: str
    actor: str
    op: str
    payload: dict
    digest: str

    @staticmethod
    def payload_digest(payload: dict) -> str:
        canonical = json.dumps(payload, ensure_ascii=False, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "ts": self.ts,
            "actor": self.actor,
            "op": self.op,
            "digest": self.digest,
            "payload": self.payload,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Event":
        event = cls(
            seq=int(record["seq"]),
            ts=str(record["ts"]),
            actor=str(record["actor"]),
            op=str(record["op"]),
            payload=record["payload"],
            digest=str(record["digest"]),
        )
        if Event.payload_digest(event.payload) != event.digest:
            raise ValueError(f"event {event.seq}: payload digest mismatch")
        return event


def dataset_digest(dataset: Dataset) -> str:
    return hashlib.sha256(dataset_to_text(dataset).encode("utf-8")).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _spans_to_records(spans: Iterable[EntitySpan]) -> list[dict]:
    return [span_to_record(s) for s in spans]


def _spans_from_records(records: Iterable[dict]) -> tuple[EntitySpan, ...]:
    return tuple(span_from_record(r) for r in records)


class Project:
    """Event-sourced annotation project over an immutable dataset."""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.config: ProjectConfig | None = None
        self.assignment: dict[str, Split] = {}
        self.split_score: float = 0.0
        self.seed_doc_ids: tuple[str, ...] = ()
        self.state = ProjectState.CREATED
        self.items: dict[tuple[int, str], ReviewItem] = {}
        self.model: TaggerModel | None = None
        self.model_path: str | None = None
        self.trained_rounds = 0
        self.last_train_summary: dict | None = None
        self.events: list[Event] = []
        self.base_dir: Path | None = None
        self._sections: dict[str, Section] = {
            s.section_id: s for d in dataset.documents for s in d.sections
        }

    # -- construction ------------------------------------------------------

    @classmethod
    def create(cls, dataset: Dataset, config: ProjectConfig, actor: str = "system") -> "Project":
        violations = validate_dataset(dataset)
        if violations:
            raise InvalidDatasetError(violations)
        if not dataset.documents:
            raise InvalidDatasetError([])
        assignment, split_score = stratified_split(dataset, config.split)
        doc_ids = sorted(d.doc_id for d in dataset.documents)
        rng = random.Random(f"{config.seed}:seed-subset")
        rng.shuffle(doc_ids)
        k = max(1, int(math.floor(len(doc_ids) * config.seed_fraction + 0.5)))
        seed_docs = sorted(doc_ids[:k])

        project = cls(dataset)
        payload = {
            "config": config.to_dict(),
            "dataset_digest": dataset_digest(dataset),
            "assignment": {doc: split.value for doc, split in assignment.items()},
            "split_score": split_score,
            "seed_doc_ids": seed_docs,
        }
        project._commit("create", payload, actor)
        return project

    @classmethod
    def replay(cls, dataset: Dataset, events: Sequence[Event]) -> "Project":
        if not events or events[0].op != "create":
            raise ValueError("event log must start with a create event")
        project = cls(dataset)
        for event in events:
            project._apply(event)
            project.events.append(event)
        return project

    # -- helpers -----------------------------------------------------------

    @property
    def project_id(self) -> str:
        return self.config.project_id if self.config else ""

    def section(self, section_id: str) -> Section:
        try:
            return self._sections[section_id]
        except KeyError:
            raise ReviewNotFoundError(f"unknown section {section_id!r}") from None

    def section_ids(self) -> list[str]:
        return [s.section_id for d in self.dataset.documents for s in d.sections]

    def seed_section_ids(self) -> list[str]:
        wanted = set(self.seed_doc_ids)
        return [
            s.section_id
            for d in self.dataset.documents
            if d.doc_id in wanted
            for s in d.sections
        ]

    def _active_pass(self) -> int:
        if self.state in (ProjectState.SEED_ANNOTATED, ProjectState.REVIEW1_IN_PROGRESS):
            return 1
        if self.state in (ProjectState.MODEL_ANNOTATED, ProjectState.REVIEW2_IN_PROGRESS):
            return 2
        raise StateViolationError(f"no review pass is open in state {self.state.value}")

    def pass_items(self, pass_no: int) -> list[ReviewItem]:
        return [item for (p, _), item in self.items.items() if p == pass_no]

    def progress(self, pass_no: int) -> tuple[int, int]:
        items = self.pass_items(pass_no)
        return sum(1 for i in items if i.status is ReviewStatus.DONE), len(items)

    def next_pending(self, pass_no: int) -> ReviewItem | None:
        order = self.seed_section_ids() if pass_no == 1 else self.section_ids()
        for sid in order:
            item = self.items.get((pass_no, sid))
            if item is not None and item.status is ReviewStatus.PENDING:
                return item
        return None

    def reviewed_spans(self, section_id: str) -> tuple[EntitySpan, ...] | None:
        """Latest human decision for a section (pass 2 wins over pass 1)."""
        for pass_no in (2, 1):
            item = self.items.get((pass_no, section_id))
            if item is not None and item.status is ReviewStatus.DONE:
                return item.reviewed
        return None

    def annotated_dataset(self) -> Dataset:
        """Dataset view with human-reviewed spans where available."""
        docs = []
        for doc in self.dataset.documents:
            sections = []
            for sec in doc.sections:
                reviewed = self.reviewed_spans(sec.section_id)
                sections.append(sec if reviewed is None else sec.with_spans(reviewed))
            docs.append(type(doc)(doc.doc_id, doc.field, tuple(sections)))
        return Dataset(documents=tuple(docs), schema_version=self.dataset.schema_version)

    def view(self) -> dict:
        """Serializable project summary; the unit of restart-equivalence."""
        done1, total1 = self.progress(1)
        done2, total2 = self.progress(2)
        return {
            "project_id": self.project_id,
            "state": self.state.value,
            "documents": len(self.dataset.documents),
            "sections": len(self._sections),
            "seed_documents": list(self.seed_doc_ids),
            "progress": {
                "pass1": {"done": done1, "total": total1},
                "pass2": {"done": done2, "total": total2},
            },
            "trained_rounds": self.trained_rounds,
            "model_path": self.model_path,
            "last_train_summary": self.last_train_summary,
            "events": len(self.events),
            "revisions": {
                f"{p}:{sid}": item.revision for (p, sid), item in sorted(self.items.items())
            },
        }

    # -- event machinery ----------------------------------------------------

    def _commit(self, op: str, payload: dict, actor: str) -> Event:
        event = Event(
            seq=len(self.events) + 1,
            ts=_now(),
            actor=actor,
            op=op,
            payload=payload,
            digest=Event.payload_digest(payload),
        )
        self._apply(event)
        self.events.append(event)
        return event

    def _apply(self, event: Event) -> None:
        handler = getattr(self, f"_apply_{event.op}", None)
        if handler is None:
            raise ValueError(f"unknown event op {event.op!r}")
        handler(event.payload)

    def _apply_create(self, payload: dict) -> None:
        self.config = ProjectConfig.from_dict(payload["config"])
        self.assignment = {
            doc: Split.parse(split) for doc, split in payload["assignment"].items()
        }
        self.split_score = float(payload["split_score"])
        self.seed_doc_ids = tuple(payload["seed_doc_ids"])
        self.state = ProjectState.CREATED

    def _apply_seed_annotate(self, payload: dict) -> None:
        for sid, records in payload["proposals"].items():
            self.items[(1, sid)] = ReviewItem(sid, 1, _spans_from_records(records))
        self.state = ProjectState.SEED_ANNOTATED

    def _apply_submit_review(self, payload: dict) -> None:
        pass_no = int(payload["pass"])
        item = self.items[(pass_no, payload["section_id"])]
        item.reviewed = _spans_from_records(payload["spans"])
        item.status = ReviewStatus.DONE
        item.revision = int(payload["revision_after"])
        if pass_no == 1 and self.state is ProjectState.SEED_ANNOTATED:
            self.state = ProjectState.REVIEW1_IN_PROGRESS
        if pass_no == 2 and self.state is ProjectState.MODEL_ANNOTATED:
            self.state = ProjectState.REVIEW2_IN_PROGRESS
        done, total = self.progress(pass_no)
        if done == total:
            self.state = ProjectState.REVIEW1_DONE if pass_no == 1 else ProjectState.FINALIZED

    def _apply_train(self, payload: dict) -> None:
        self.trained_rounds += 1
        self.model_path = payload.get("model_path")
        self.last_train_summary = {
            "dev_f1": payload["dev_f1"],
            "best_epoch": payload["best_epoch"],
            "epochs_run": payload["epochs_run"],
            "train_sections": payload["train_sections"],
            "dev_sections": payload["dev_sections"],
        }
        self.state = ProjectState.MODEL_TRAINED

    def _apply_model_annotate(self, payload: dict) -> None:
        for sid, records in payload["proposals"].items():
            self.items[(2, sid)] = ReviewItem(sid, 2, _spans_from_records(records))
        self.state = ProjectState.MODEL_ANNOTATED

    def _apply_finalize(self, payload: dict) -> None:
        pass  # export is a pure function of reviewed state; nothing changes

    # -- operations ----------------------------------------------------------

    def run_seed_annotation(self, actor: str = "system") -> Event:
        if self.state is not ProjectState.CREATED:
            raise StateViolationError(
                f"seed annotation requires state CREATED, project is {self.state.value}"
            )
        proposals = {
            sid: _spans_to_records(seed_preannotate(self.section(sid)))
            for sid in self.seed_section_ids()
        }
        return self._commit("seed_annotate", {"proposals": proposals}, actor)

    def submit_review(
        self,
        section_id: str,
        spans: Sequence[EntitySpan],
        expected_revision: int | None = None,
        actor: str = "human",
    ) -> Event:
        pass_no = self._active_pass()
        item = self.items.get((pass_no, section_id))
        if item is None:
            raise ReviewNotFoundError(
                f"section {section_id!r} has no review item in pass {pass_no}"
            )
        section = self.section(section_id)
        violations = check_spans(spans, len(section.text), section_id=section_id)
        if violations:
            raise InvalidSpansError(violations)
        if expected_revision is not None and expected_revision != item.revision:
            raise VersionConflictError(
                f"revision {expected_revision} is stale for section {section_id!r} "
                f"(current {item.revision})"
            )
        normalized = [
            EntitySpan(s.start, s.end, s.entity_type, Provenance.HUMAN) for s in spans
        ]
        payload = {
            "section_id": section_id,
            "pass": pass_no,
            "spans": _spans_to_records(normalized),
            "revision_after": item.revision + 1,
        }
        return self._commit("submit_review", payload, actor)

    def run_training_round(
        self,
        train_config: TrainConfig = TrainConfig(),
        model_dir: Path | None = None,
        actor: str = "system",
    ) -> Event:
        if self.state is not ProjectState.REVIEW1_DONE:
            raise StateViolationError(
                f"training requires state REVIEW1_DONE, project is {self.state.value}"
            )
        reviewed = [(sid, self.items[(1, sid)].reviewed) for sid in self.seed_section_ids()]
        order = sorted(sid for sid, _ in reviewed)
        rng = random.Random(f"{self.config.seed}:dev-carve")
        rng.shuffle(order)
        n_dev = max(1, int(math.floor(len(order) * DEV_CARVE_FRACTION + 0.5)))
        dev_ids = set(order[:n_dev])
        train_examples, dev_examples = [], []
        for sid, spans in reviewed:
            example = make_example(self.section(sid), spans)
            (dev_examples if sid in dev_ids else train_examples).append(example)
        if not train_examples or not dev_examples:
            raise StateViolationError("reviewed seed subset is too small to train on")

        model, log = train(train_examples, dev_examples, train_config)
        model_path = None
        if model_dir is not None:
            model_dir.mkdir(parents=True, exist_ok=True)
            filename = f"round-{self.trained_rounds + 1}.model"
            _atomic(model_dir / filename, lambda tmp: save_model(model, tmp))
            model_path = os.path.join(model_dir.name, filename)
        payload = {
            "model_path": model_path,
            "dev_f1": log.best_dev_f1,
            "best_epoch": log.best_epoch,
            "epochs_run": log.epochs_run,
            "train_sections": len(train_examples),
            "dev_sections": len(dev_examples),
            "train_config": {
                "max_epochs": train_config.max_epochs,
                "patience": train_config.patience,
                "seed": train_config.seed,
                "averaging": train_config.averaging,
            },
        }
        event = self._commit("train", payload, actor)
        self.model = model
        return event

    def _ensure_model(self) -> TaggerModel:
        if self.model is not None:
            return self.model
        if self.model_path and self.base_dir is not None:
            self.model = load_model(self.base_dir / self.model_path)
            return self.model
        raise StateViolationError("no trained model is available")

    def run_model_annotation(self, actor: str = "system") -> Event:
        if self.state is not ProjectState.MODEL_TRAINED:
            raise StateViolationError(
                f"model annotation requires state MODEL_TRAINED, project is {self.state.value}"
            )
        model = self._ensure_model()
        proposals = {}
        for sid in self.section_ids():
            reviewed = self.reviewed_spans(sid)
            if reviewed is not None:
                proposals[sid] = _spans_to_records(reviewed)
            else:
                proposals[sid] = _spans_to_records(predict(model, self.section(sid)))
        return self._commit("model_annotate", {"proposals": proposals}, actor)

    def finalize(self, actor: str = "system") -> tuple[Dataset, dict]:
        if self.state is not ProjectState.FINALIZED:
            pending = []
            if self.state in (ProjectState.MODEL_ANNOTATED, ProjectState.REVIEW2_IN_PROGRESS):
                pending = [
                    item.section_id
                    for item in self.pass_items(2)
                    if item.status is ReviewStatus.PENDING
                ]
            detail = f"; pending sections: {pending[:3]}" if pending else ""
            raise StateViolationError(
                f"export requires state FINALIZED, project is {self.state.value}{detail}"
            )
        export = self.annotated_dataset()
        per_type = {t.value: 0 for t in EntityType}
        for doc in export.documents:
            for sec in doc.sections:
                for span in sec.spans:
                    per_type[span.entity_type.value] += 1
        stats = {
            "documents": len(export.documents),
            "sections": len(self._sections),
            "spans_per_type": per_type,
            "spans_total": sum(per_type.values()),
            "reviews": {"pass1": self.progress(1)[0], "pass2": self.progress(2)[0]},
        }
        self._commit("finalize", {"stats": stats}, actor)
        return export, stats


def _atomic(path: Path, write_fn) -> None:
    """Write to a sibling temp file, then rename over the target."""
    tmp = path.with_name(path.name + ".tmp")
    write_fn(tmp)
    os.replace(tmp, path)


def _atomic_text(path: Path, content: str) -> None:
    _atomic(path, lambda tmp: tmp.write_text(content, encoding="utf-8", newline="\n"))


class ProjectStore:
    """Directory-per-project persistence for the bootstrap loop.

    Layout: ``dataset.jsonl`` (immutable input), ``events.log`` (append-only
    JSONL, source of truth), ``project.json`` (derived descriptor),
    ``models/`` and ``snapshots/`` (one annotated-dataset snapshot per state
    advance), plus ``export.jsonl`` once finalized.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def project_dir(self, project_id: str) -> Path:
        return self.root / project_id

    def list_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "events.log").is_file()
        )

    def exists(self, project_id: str) -> bool:
        return (self.project_dir(project_id) / "events.log").is_file()

    def create(self, dataset: Dataset, config: ProjectConfig, actor: str = "system") -> Project:
        directory = self.project_dir(config.project_id)
        if self.exists(config.project_id):
            raise FileExistsError(f"project {config.project_id!r} already exists")
        project = Project.create(dataset, config, actor=actor)
        project.base_dir = directory
        directory.mkdir(parents=True, exist_ok=True)
        _atomic(directory / "dataset.jsonl", lambda tmp: write_dataset(dataset, tmp))
        with open(directory / "events.log", "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(project.events[0].to_record(), ensure_ascii=False) + "\n")
        self._write_descriptor(project)
        return project

    def load(self, project_id: str) -> Project:
        directory = self.project_dir(project_id)
        if not self.exists(project_id):
            raise FileNotFoundError(f"no project {project_id!r} under {self.root}")
        dataset = read_dataset(directory / "dataset.jsonl")
        events = []
        for lineno, line in enumerate(
            (directory / "events.log").read_text(encoding="utf-8").splitlines(), start=1
        ):
            if line.strip():
                events.append(Event.from_record(json.loads(line)))
        project = Project.replay(dataset, events)
        project.base_dir = directory
        return project

    # -- mutating wrappers (validate in memory first, then persist) ---------

    def _persist(self, project: Project, event: Event, state_before: ProjectState) -> None:
        directory = project.base_dir
        with open(directory / "events.log", "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(event.to_record(), ensure_ascii=False) + "\n")
        if project.state is not state_before:
            snapdir = directory / "snapshots"
            snapdir.mkdir(exist_ok=True)
            name = f"{event.seq:04d}-{project.state.value}.jsonl"
            _atomic(snapdir / name, lambda tmp: write_dataset(project.annotated_dataset(), tmp))
        self._write_descriptor(project)

    def _write_descriptor(self, project: Project) -> None:
        descriptor = dict(project.view())
        descriptor["config"] = project.config.to_dict()
        _atomic_text(
            project.base_dir / "project.json",
            json.dumps(descriptor, ensure_ascii=False, indent=2) + "\n",
        )

    def seed_annotate(self, project: Project, actor: str = "system") -> Event:
        before = project.state
        event = project.run_seed_annotation(actor=actor)
        self._persist(project, event, before)
        return event

    def submit_review(
        self,
        project: Project,
        section_id: str,
        spans: Sequence[EntitySpan],
        expected_revision: int | None = None,
        actor: str = "human",
    ) -> Event:
        before = project.state
        event = project.submit_review(section_id, spans, expected_revision, actor=actor)
        self._persist(project, event, before)
        return event

    def train(
        self, project: Project, train_config: TrainConfig = TrainConfig(), actor: str = "system"
    ) -> Event:
        before = project.state
        event = project.run_training_round(
            train_config, model_dir=project.base_dir / "models", actor=actor
        )
        self._persist(project, event, before)
        return event

    def model_annotate(self, project: Project, actor: str = "system") -> Event:
        before = project.state
        event = project.run_model_annotation(actor=actor)
        self._persist(project, event, before)
        return event

    def finalize(self, project: Project, actor: str = "system") -> tuple[Dataset, dict]:
        before = project.state
        export, stats = project.finalize(actor=actor)
        _atomic(project.base_dir / "export.jsonl", lambda tmp: write_dataset(export, tmp))
        self._persist(project, project.events[-1], before)
        return export, stats
