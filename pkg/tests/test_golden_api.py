"""Wire-format goldens: the documented JSON bodies must not drift."""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from resume_ner.corpus import EntityType, Split, doc_to_record
from resume_ner.fixture import FixtureProfile, generate_fixture
from resume_ner.service import create_app

GOLDEN_DIR = Path(__file__).parent / "golden"


def golden_dataset():
    profile = FixtureProfile(
        {Split.TRAIN: {EntityType.SKILL: 6, EntityType.CITY: 12}, Split.DEV: {}, Split.TEST: {}},
        {Split.TRAIN: {"Ai Engineer": 2}, Split.DEV: {}, Split.TEST: {}},
    )
    dataset, _ = generate_fixture(profile, seed=2024)
    return dataset


def create_body(dataset):
    return {
        "project_id": "golden",
        "config": {"seed": 1, "seed_fraction": 0.5, "split": {"seed": 1, "restarts": 2}},
        "dataset": {
            "schema_version": 1,
            "documents": [doc_to_record(d) for d in dataset.documents],
        },
    }


def check(name: str, payload: dict) -> None:
    path = GOLDEN_DIR / name
    assert path.is_file(), f"golden file {name} missing"
    assert payload == json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture
def client(tmp_path):
    with TestClient(create_app(tmp_path)) as c:
        yield c


def test_golden_responses(client):
    dataset = golden_dataset()
    created = client.post("/projects", json=create_body(dataset))
    assert created.status_code == 201
    check("api_create_project.json", created.json())

    conflict = client.post("/projects/golden/stages/train")
    assert conflict.status_code == 409
    check("api_error_state_violation.json", conflict.json())

    assert client.post("/projects/golden/stages/seed-annotate").status_code == 200
    queue = client.get("/projects/golden/queue/next", params={"pass": 1})
    assert queue.status_code == 200
    check("api_queue_next.json", queue.json())

    item = queue.json()["item"]
    bad = client.post(
        f"/projects/golden/sections/{item['section_id']}/review",
        json={"revision": item["revision"], "spans": [{"start": 0, "end": 9999, "type": "SKILL"}]},
    )
    assert bad.status_code == 422
    check("api_error_span_bounds.json", bad.json())

    ok = client.post(
        f"/projects/golden/sections/{item['section_id']}/review",
        json={
            "revision": item["revision"],
            "spans": [{"start": s["start"], "end": s["end"], "type": s["type"]} for s in item["proposals"]],
        },
    )
    assert ok.status_code == 200
    check("api_review_accepted.json", ok.json())
