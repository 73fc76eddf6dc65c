import hashlib
import time

import pytest
from fastapi.testclient import TestClient

from resume_ner.corpus import EntityType, Split, doc_to_record
from resume_ner.evaluation import predictions_to_lines
from resume_ner.fixture import FixtureProfile, generate_fixture
from resume_ner.service import create_app


def small_dataset(seed=11):
    profile = FixtureProfile(
        {Split.TRAIN: {EntityType.SKILL: 40, EntityType.DATE: 16}, Split.DEV: {}, Split.TEST: {}},
        {
            Split.TRAIN: {"Ai Engineer": 6, "Android Developer": 4},
            Split.DEV: {},
            Split.TEST: {},
        },
    )
    dataset, _ = generate_fixture(profile, seed=seed)
    return dataset


def create_body(dataset, project_id="demo"):
    return {
        "project_id": project_id,
        "config": {"seed": 5, "seed_fraction": 0.3, "split": {"seed": 5, "restarts": 2}},
        "dataset": {
            "schema_version": 1,
            "documents": [doc_to_record(d) for d in dataset.documents],
        },
    }


def wait_for_job(client, project_id, job_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/projects/{project_id}/jobs/{job_id}").json()
        if status["status"] != "running":
            return status
        time.sleep(0.05)
    raise TimeoutError("training job did not finish")


def review_pass(client, project_id, pass_no, transform=None):
    while True:
        payload = client.get(
            f"/projects/{project_id}/queue/next", params={"pass": pass_no}
        ).json()
        if payload["item"] is None:
            return payload
        item = payload["item"]
        spans = [
            {"start": s["start"], "end": s["end"], "type": s["type"]}
            for s in item["proposals"]
        ]
        if transform is not None:
            spans = transform(item, spans)
        response = client.post(
            f"/projects/{project_id}/sections/{item['section_id']}/review",
            json={"revision": item["revision"], "spans": spans},
        )
        assert response.status_code == 200, response.text


def drive_to_finalized(client, project_id="demo"):
    assert client.post(f"/projects/{project_id}/stages/seed-annotate").status_code == 200
    review_pass(client, project_id, 1)
    r = client.post(
        f"/projects/{project_id}/stages/train",
        json={"max_epochs": 6, "patience": 6, "seed": 1},
    )
    assert r.status_code == 202
    status = wait_for_job(client, project_id, r.json()["job_id"])
    assert status["status"] == "succeeded"
    assert client.post(f"/projects/{project_id}/stages/model-annotate").status_code == 200
    review_pass(client, project_id, 2)
    return client.post(f"/projects/{project_id}/stages/finalize")


@pytest.fixture
def env(tmp_path):
    dataset = small_dataset()
    app = create_app(tmp_path)
    with TestClient(app) as client:
        yield client, dataset, tmp_path


def tree_digest(root):
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


class TestLifecycle:
    def test_create_returns_descriptor(self, env):
        client, dataset, _ = env
        r = client.post("/projects", json=create_body(dataset))
        assert r.status_code == 201
        body = r.json()
        assert body["state"] == "CREATED"
        assert body["documents"] == 10
        assert body["sections"] == 50

    def test_create_rejects_invalid_dataset(self, env):
        client, dataset, _ = env
        body = create_body(dataset)
        body["dataset"]["documents"][0]["sections"][0]["spans"] = [
            {"start": 0, "end": 99999, "type": "SKILL"}
        ]
        r = client.post("/projects", json=body)
        assert r.status_code == 422
        assert r.json()["code"] == "INVALID_DATASET"

    def test_duplicate_project_conflicts(self, env):
        client, dataset, _ = env
        assert client.post("/projects", json=create_body(dataset)).status_code == 201
        r = client.post("/projects", json=create_body(dataset))
        assert r.status_code == 409
        assert r.json()["code"] == "ALREADY_EXISTS"

    def test_unknown_project_404(self, env):
        client, _, _ = env
        r = client.get("/projects/ghost")
        assert r.status_code == 404
        assert r.json()["code"] == "NOT_FOUND"

    def test_list_projects(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset, "a"))
        client.post("/projects", json=create_body(dataset, "b"))
        names = [p["project_id"] for p in client.get("/projects").json()["projects"]]
        assert names == ["a", "b"]

    def test_train_in_created_state_is_409(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        r = client.post("/projects/demo/stages/train")
        assert r.status_code == 409
        assert r.json()["code"] == "STATE_VIOLATION"
        # failed train must not leave the project lock held
        assert client.post("/projects/demo/stages/seed-annotate").status_code == 200

    def test_unknown_stage_404(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        assert client.post("/projects/demo/stages/deploy").status_code == 404

    def test_invalid_body_wrapped_as_api_error(self, env):
        client, _, _ = env
        r = client.post("/projects", json={"project_id": 3})
        assert r.status_code == 422
        assert r.json()["code"] == "INVALID_BODY"


class TestReviewQueue:
    def test_queue_and_submit_flow(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        payload = client.get("/projects/demo/queue/next", params={"pass": 1}).json()
        item = payload["item"]
        assert item is not None
        assert item["tokens"], "token boundaries must be served"
        assert payload["progress"]["total"] == 15  # 3 seed docs x 5 sections
        r = client.post(
            f"/projects/demo/sections/{item['section_id']}/review",
            json={"revision": item["revision"], "spans": []},
        )
        assert r.status_code == 200
        assert r.json()["progress"]["done"] == 1
        assert r.json()["revision"] == 1

    def test_exhausted_queue_has_empty_marker(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        review_pass(client, "demo", 1)
        payload = client.get("/projects/demo/queue/next", params={"pass": 1}).json()
        assert payload["item"] is None
        assert payload["progress"]["done"] == payload["progress"]["total"] == 15

    def test_out_of_bounds_span_is_422_with_offsets(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        item = client.get("/projects/demo/queue/next", params={"pass": 1}).json()["item"]
        r = client.post(
            f"/projects/demo/sections/{item['section_id']}/review",
            json={
                "revision": item["revision"],
                "spans": [{"start": 0, "end": 99999, "type": "SKILL"}],
            },
        )
        assert r.status_code == 422
        assert r.json()["code"] == "SPAN_OUT_OF_BOUNDS"
        assert "99999" in r.json()["message"]

    def test_stale_revision_conflicts(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        item = client.get("/projects/demo/queue/next", params={"pass": 1}).json()["item"]
        url = f"/projects/demo/sections/{item['section_id']}/review"
        assert client.post(url, json={"revision": 0, "spans": []}).status_code == 200
        r = client.post(url, json={"revision": 0, "spans": []})
        assert r.status_code == 409
        assert r.json()["code"] == "VERSION_CONFLICT"


class TestTrainingJob:
    def test_job_lifecycle_reports_dev_f1(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        review_pass(client, "demo", 1)
        r = client.post(
            "/projects/demo/stages/train", json={"max_epochs": 6, "patience": 6, "seed": 1}
        )
        assert r.status_code == 202
        status = wait_for_job(client, "demo", r.json()["job_id"])
        assert status["status"] == "succeeded"
        assert "dev_f1" in status["result"]
        assert client.get("/projects/demo").json()["state"] == "MODEL_TRAINED"

    def test_unknown_job_404(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        assert client.get("/projects/demo/jobs/nope").status_code == 404


class TestEvaluationEndpoints:
    def test_gold_predictions_score_100(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        predictions = {
            sec.section_id: list(sec.spans)
            for d in dataset.documents
            for sec in d.sections
            if sec.spans
        }
        lines = "\n".join(predictions_to_lines(predictions))
        r = client.post(
            "/projects/demo/predictions",
            content=lines.encode(),
            headers={"content-type": "text/plain"},
        )
        assert r.status_code == 200
        report = client.get("/projects/demo/metrics", params={"against": "TRAIN"}).json()
        assert report["report"]["micro_f1"] == 100.0
        assert report["report"]["weighted_f1"] == 100.0

    def test_malformed_line_cites_line_number(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        lines = ['{"section_id": "x", "start": 0, "end": 1, "type": "SKILL"}'] * 6
        lines.insert(6, "{broken")
        r = client.post(
            "/projects/demo/predictions",
            content="\n".join(lines).encode(),
            headers={"content-type": "text/plain"},
        )
        assert r.status_code == 422
        assert r.json()["code"] == "MALFORMED_PREDICTIONS"
        assert r.json()["context"]["line"] == 7

    def test_unknown_prediction_section_rejected(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        r = client.post(
            "/projects/demo/predictions",
            content=b'{"section_id": "ghost", "start": 0, "end": 1, "type": "SKILL"}',
            headers={"content-type": "text/plain"},
        )
        assert r.status_code == 422
        assert r.json()["code"] == "UNKNOWN_SECTION"

    def test_metrics_without_predictions_404(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        assert client.get("/projects/demo/metrics").status_code == 404

    def test_export_requires_finalized(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        r = client.get("/projects/demo/export")
        assert r.status_code == 409
        assert r.json()["code"] == "STATE_VIOLATION"

    def test_export_is_byte_identical_to_dataset_writer(self, env):
        client, dataset, _ = env
        client.post("/projects", json=create_body(dataset))
        r = drive_to_finalized(client)
        assert r.status_code == 200
        export = client.get("/projects/demo/export")
        assert export.status_code == 200
        from resume_ner.corpus import dataset_from_lines, dataset_to_text

        exported = dataset_from_lines(export.text.splitlines())
        assert export.text == dataset_to_text(exported)


class TestDurability:
    def test_restart_preserves_views(self, env):
        client, dataset, root = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        review_pass(client, "demo", 1)
        view_before = client.get("/projects/demo").json()
        with TestClient(create_app(root)) as fresh:
            assert fresh.get("/projects/demo").json() == view_before

    def test_failed_calls_leave_directory_unchanged(self, env):
        client, dataset, root = env
        client.post("/projects", json=create_body(dataset))
        client.post("/projects/demo/stages/seed-annotate")
        project_dir = root / "demo"
        digest = tree_digest(project_dir)
        assert client.post("/projects/demo/stages/finalize").status_code == 409
        item = client.get("/projects/demo/queue/next", params={"pass": 1}).json()["item"]
        r = client.post(
            f"/projects/demo/sections/{item['section_id']}/review",
            json={"revision": item["revision"] + 5, "spans": []},
        )
        assert r.status_code == 409
        r = client.post(
            f"/projects/demo/sections/{item['section_id']}/review",
            json={"revision": item["revision"], "spans": [{"start": 0, "end": 10**6, "type": "SKILL"}]},
        )
        assert r.status_code == 422
        assert tree_digest(project_dir) == digest
