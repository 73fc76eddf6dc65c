"""HTTP facade over the annotation projects: review queue, stages, metrics.

State lives in a ProjectStore directory (``RESUME_NER_DATA_ROOT`` or an
explicit argument); every request reloads the project from disk, so a
restarted service sees exactly the state the event log describes.  One
writer per project: mutating endpoints take the project's lock without
blocking and answer 409 BUSY if it is held (training holds it for the whole
background run).

Every non-2xx response body is a single error object:
``{"code": ..., "message": ..., "context": {...}}``.
"""

from __future__ import annotations

import os
import threading
import uuid
from pathlib import Path
from typing import Any

from fastapi import Body, FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .bootstrap import (
    InvalidSpansError,
    Project,
    ProjectConfig,
    ProjectState,
    ProjectStore,
    ReviewNotFoundError,
    StateViolationError,
    VersionConflictError,
)
from .corpus import (
    Dataset,
    DatasetFormatError,
    InvalidDatasetError,
    Split,
    dataset_to_text,
    doc_from_record,
    sections_by_id,
    span_from_record,
    validate_dataset,
)
from .evaluation import PredictionsFormatError, predictions_from_lines, score
from .splitter import SplitConfig
from .tagger import TrainConfig
from .textproc import tokenize

DATA_ROOT_ENV = "RESUME_NER_DATA_ROOT"

STAGES = ("seed-annotate", "train", "model-annotate", "finalize")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, context: dict | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.context = context or {}
        super().__init__(message)

    def to_response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"code": self.code, "message": self.message, "context": self.context},
        )


def _map_domain_error(exc: Exception) -> ApiError:
    if isinstance(exc, StateViolationError):
        return ApiError(409, "STATE_VIOLATION", str(exc))
    if isinstance(exc, VersionConflictError):
        return ApiError(409, "VERSION_CONFLICT", str(exc))
    if isinstance(exc, ReviewNotFoundError):
        return ApiError(404, "NOT_FOUND", str(exc))
    if isinstance(exc, InvalidSpansError):
        first = exc.violations[0]
        return ApiError(
            422,
            first.code,
            str(exc),
            {"violations": [{"code": v.code, "message": v.message} for v in exc.violations]},
        )
    if isinstance(exc, InvalidDatasetError):
        return ApiError(
            422,
            "INVALID_DATASET",
            str(exc),
            {"violations": [{"code": v.code, "message": v.message} for v in exc.violations]},
        )
    if isinstance(exc, PredictionsFormatError):
        return ApiError(422, "MALFORMED_PREDICTIONS", str(exc), {"line": exc.line})
    if isinstance(exc, DatasetFormatError):
        return ApiError(422, "MALFORMED_DATASET", str(exc), {"line": exc.line})
    if isinstance(exc, FileExistsError):
        return ApiError(409, "ALREADY_EXISTS", str(exc))
    if isinstance(exc, FileNotFoundError):
        return ApiError(404, "NOT_FOUND", str(exc))
    if isinstance(exc, ValueError):
        return ApiError(422, "INVALID_VALUE", str(exc))
    raise exc


class _Jobs:
    """In-memory training-job registry (project state itself is durable)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}

    def start(self, project_id: str) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = {"job_id": job_id, "project_id": project_id, "status": "running"}
        return job_id

    def finish(self, job_id: str, status: str, **extra: Any) -> None:
        with self._lock:
            self._jobs[job_id].update(status=status, **extra)

    def get(self, project_id: str, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None or job["project_id"] != project_id:
            raise ApiError(404, "NOT_FOUND", f"no job {job_id!r} for project {project_id!r}")
        return dict(job)


class SpanBody(BaseModel):
    start: int
    end: int
    type: str
    provenance: str = "HUMAN"


class ReviewBody(BaseModel):
    revision: int
    spans: list[SpanBody] = Field(default_factory=list)


class TrainBody(BaseModel):
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    averaging: bool = True


class CreateProjectBody(BaseModel):
    project_id: str
    config: dict = Field(default_factory=dict)
    dataset: dict


def _parse_dataset(payload: dict) -> Dataset:
    if "documents" not in payload:
        raise ApiError(422, "MALFORMED_DATASET", "dataset payload needs a documents list")
    version = int(payload.get("schema_version", 1))
    try:
        documents = tuple(doc_from_record(r) for r in payload["documents"])
    except ValueError as e:
        raise ApiError(422, "MALFORMED_DATASET", str(e)) from None
    dataset = Dataset(documents=documents, schema_version=version)
    violations = validate_dataset(dataset)
    if violations:
        raise _map_domain_error(InvalidDatasetError(violations))
    return dataset


def create_app(data_root: str | Path | None = None) -> FastAPI:
    root = Path(data_root or os.environ.get(DATA_ROOT_ENV, "projects"))
    store = ProjectStore(root)
    jobs = _Jobs()
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    app = FastAPI(title="resume-ner service", version="0.1.0")

    def lock_for(project_id: str) -> threading.Lock:
        with locks_guard:
            if project_id not in locks:
                locks[project_id] = threading.Lock()
            return locks[project_id]

    def load(project_id: str) -> Project:
        try:
            return store.load(project_id)
        except FileNotFoundError as e:
            raise ApiError(404, "NOT_FOUND", str(e)) from None

    def describe(project: Project) -> dict:
        view = project.view()
        view["busy"] = lock_for(project.project_id).locked()
        return view

    @app.exception_handler(ApiError)
    async def _api_error_handler(_request: Request, exc: ApiError):
        return exc.to_response()

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(_request: Request, exc: RequestValidationError):
        errors = [
            {"loc": [str(x) for x in err.get("loc", ())], "msg": str(err.get("msg", ""))}
            for err in exc.errors()
        ]
        return ApiError(422, "INVALID_BODY", "request body failed validation", {"errors": errors}).to_response()

    # -- project lifecycle ---------------------------------------------------

    @app.post("/projects", status_code=201)
    def create_project(body: CreateProjectBody):
        dataset = _parse_dataset(body.dataset)
        raw = dict(body.config)
        raw["project_id"] = body.project_id
        try:
            config = ProjectConfig(
                project_id=body.project_id,
                seed=int(raw.get("seed", 0)),
                seed_fraction=float(raw.get("seed_fraction", 0.2)),
                split=SplitConfig.from_dict(raw.get("split", {})),
            )
            project = store.create(dataset, config, actor="service")
        except Exception as e:  # noqa: BLE001 - mapped to one ApiError
            raise _map_domain_error(e) from None
        return describe(project)

    @app.get("/projects")
    def list_projects():
        return {"projects": [describe(store.load(pid)) for pid in store.list_ids()]}

    @app.get("/projects/{project_id}")
    def inspect_project(project_id: str):
        return describe(load(project_id))

    @app.post("/projects/{project_id}/stages/{stage}")
    def advance_stage(project_id: str, stage: str, body: TrainBody | None = Body(default=None)):
        if stage not in STAGES:
            raise ApiError(404, "NOT_FOUND", f"unknown stage {stage!r}; one of {STAGES}")
        lock = lock_for(project_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "BUSY", f"project {project_id!r} has an operation in progress")
        handed_to_thread = False
        try:
            project = load(project_id)
            if stage == "train":
                if project.state is not ProjectState.REVIEW1_DONE:
                    raise _map_domain_error(
                        StateViolationError(
                            f"training requires state REVIEW1_DONE, project is {project.state.value}"
                        )
                    )
                body = body or TrainBody()
                try:
                    config = TrainConfig(
                        max_epochs=body.max_epochs,
                        patience=body.patience,
                        seed=body.seed,
                        averaging=body.averaging,
                    )
                except ValueError as e:
                    raise _map_domain_error(e) from None
                job_id = jobs.start(project_id)

                def _run() -> None:
                    try:
                        store.train(project, config, actor="service")
                        jobs.finish(job_id, "succeeded", result=project.last_train_summary)
                    except Exception as e:  # noqa: BLE001 - reported via job status
                        jobs.finish(job_id, "failed", error=str(e))
                    finally:
                        lock.release()

                threading.Thread(target=_run, name=f"train-{project_id}", daemon=True).start()
                handed_to_thread = True
                return JSONResponse(status_code=202, content={"job_id": job_id, "status": "running"})

            try:
                if stage == "seed-annotate":
                    store.seed_annotate(project, actor="service")
                    extra: dict = {}
                elif stage == "model-annotate":
                    store.model_annotate(project, actor="service")
                    extra = {}
                else:  # finalize
                    _, stats = store.finalize(project, actor="service")
                    extra = {"stats": stats}
            except Exception as e:  # noqa: BLE001 - mapped to one ApiError
                raise _map_domain_error(e) from None
        finally:
            if not handed_to_thread:
                lock.release()
        return {"project": describe(project), **extra}

    @app.get("/projects/{project_id}/jobs/{job_id}")
    def job_status(project_id: str, job_id: str):
        load(project_id)
        return jobs.get(project_id, job_id)

    # -- review queue ----------------------------------------------------------

    @app.get("/projects/{project_id}/queue/next")
    def queue_next(project_id: str, pass_no: int = Query(alias="pass", ge=1, le=2)):
        project = load(project_id)
        done, total = project.progress(pass_no)
        item = project.next_pending(pass_no)
        payload = {
            "item": None,
            "progress": {"done": done, "total": total},
            "state": project.state.value,
        }
        if item is not None:
            section = project.section(item.section_id)
            payload["item"] = {
                "section_id": item.section_id,
                "kind": section.kind.value,
                "text": section.text,
                "tokens": [
                    {"text": t.text, "start": t.start, "end": t.end}
                    for t in tokenize(section.text)
                ],
                "proposals": [
                    {
                        "start": s.start,
                        "end": s.end,
                        "type": s.entity_type.value,
                        "provenance": s.provenance.value,
                    }
                    for s in item.proposals
                ],
                "pass": item.pass_no,
                "revision": item.revision,
            }
        return payload

    @app.post("/projects/{project_id}/sections/{section_id:path}/review")
    def submit_review(project_id: str, section_id: str, body: ReviewBody):
        lock = lock_for(project_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "BUSY", f"project {project_id!r} has an operation in progress")
        try:
            project = load(project_id)
            try:
                spans = [
                    span_from_record(
                        {"start": s.start, "end": s.end, "type": s.type, "provenance": "HUMAN"}
                    )
                    for s in body.spans
                ]
                store.submit_review(
                    project,
                    section_id,
                    spans,
                    expected_revision=body.revision,
                    actor="service",
                )
            except Exception as e:  # noqa: BLE001 - mapped to one ApiError
                raise _map_domain_error(e) from None
            pass_no = max(p for (p, sid) in project.items if sid == section_id)
            item = project.items[(pass_no, section_id)]
            done, total = project.progress(item.pass_no)
        finally:
            lock.release()
        return {
            "state": project.state.value,
            "revision": item.revision,
            "progress": {"done": done, "total": total},
        }

    # -- evaluation & export -----------------------------------------------------

    @app.post("/projects/{project_id}/predictions")
    def upload_predictions(project_id: str, body: bytes = Body(media_type="text/plain")):
        project = load(project_id)
        try:
            predictions = predictions_from_lines(body.decode("utf-8").splitlines())
        except PredictionsFormatError as e:
            raise _map_domain_error(e) from None
        index = sections_by_id(project.dataset)
        for sid in predictions:
            if sid not in index:
                raise ApiError(
                    422, "UNKNOWN_SECTION", f"predictions reference unknown section {sid!r}"
                )
        path = store.project_dir(project_id) / "predictions.jsonl"
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(body)
        os.replace(tmp, path)
        return {
            "sections": len(predictions),
            "spans": sum(len(v) for v in predictions.values()),
        }

    @app.get("/projects/{project_id}/metrics")
    def metrics(project_id: str, against: str = Query(default="TEST")):
        project = load(project_id)
        try:
            split = Split.parse(against)
        except ValueError as e:
            raise _map_domain_error(e) from None
        path = store.project_dir(project_id) / "predictions.jsonl"
        if not path.is_file():
            raise ApiError(404, "NOT_FOUND", "no predictions uploaded for this project")
        predictions = predictions_from_lines(path.read_text(encoding="utf-8").splitlines())
        gold = (
            project.annotated_dataset()
            if project.state is ProjectState.FINALIZED
            else project.dataset
        )
        in_split = {
            sid
            for sid, (doc, _) in sections_by_id(gold).items()
            if project.assignment.get(doc.doc_id) is split
        }
        scoped = {sid: spans for sid, spans in predictions.items() if sid in in_split}
        try:
            report = score(gold, project.assignment, split, scoped)
        except ValueError as e:
            raise _map_domain_error(e) from None
        return {"against": split.value, "report": report.to_dict()}

    @app.get("/projects/{project_id}/export")
    def export(project_id: str):
        project = load(project_id)
        if project.state is not ProjectState.FINALIZED:
            raise ApiError(
                409,
                "STATE_VIOLATION",
                f"export requires state FINALIZED, project is {project.state.value}",
            )
        path = store.project_dir(project_id) / "export.jsonl"
        if path.is_file():
            return Response(path.read_bytes(), media_type="application/x-ndjson")
        # all reviews are in but the finalize stage has not run: derive purely
        return Response(
            dataset_to_text(project.annotated_dataset()), media_type="application/x-ndjson"
        )

    return app
