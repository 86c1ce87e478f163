from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from rhetsum.corpus import save_corpus
from rhetsum.embedding import TrainConfig, train
from rhetsum.service import ServiceSettings, create_app
from rhetsum.teacher import default_oracle, generate


@pytest.fixture()
def workdir(tmp_path):
    corpus, truth = generate(default_oracle(ambiguous_weight=0.05), 30, seed=17)
    from conftest import make_text
    from rhetsum.corpus import Corpus

    pair = make_text(
        "pair", [("now", "ann", "topic", "opens"), ("now", "bob", "topic", "closes")]
    )
    corpus = Corpus.from_texts(list(corpus.texts) + [pair])
    corpus_path = tmp_path / "corpus.jsonl"
    truth_path = tmp_path / "truth.jsonl"
    table_path = tmp_path / "table.bin"
    save_corpus(corpus, corpus_path)
    truth.save(truth_path)
    table = train(corpus, TrainConfig(dim=6, epochs=4, seed=0, batch_size=64))
    table.save(table_path)
    return tmp_path, corpus, truth


def settings_for(tmp_path, budget=50, epsilon=20.0, q=4):
    return ServiceSettings(
        corpus_path=str(tmp_path / "corpus.jsonl"),
        state_dir=str(tmp_path / "state"),
        table_path=str(tmp_path / "table.bin"),
        ground_truth_path=str(tmp_path / "truth.jsonl"),
        budget=budget,
        epsilon=epsilon,
        k=5,
        q=q,
        seed=0,
        cluster_target=40,
    )


@pytest.fixture()
def client(workdir):
    tmp_path, corpus, truth = workdir
    app = create_app(settings_for(tmp_path))
    return TestClient(app), corpus, tmp_path


def two_edu_text_id(corpus):
    for text in corpus.texts:
        if len(text.edus) == 2:
            return text.id
    raise AssertionError("fixture corpus lacks a 2-EDU text")


def test_health(client):
    http, corpus, _ = client
    body = http.get("/v1/health").json()
    assert body["status"] == "ok"
    assert body["texts"] == len(corpus.texts)


def test_unknown_text_404(client):
    http, _, _ = client
    assert http.post("/v1/sessions", json={"text_id": "nope"}).status_code == 404


def test_unknown_session_404(client):
    http, _, _ = client
    assert http.get("/v1/sessions/zzz").status_code == 404


def test_full_session_flow(client):
    http, corpus, _ = client
    tid = two_edu_text_id(corpus)
    snap = http.post("/v1/sessions", json={"text_id": tid}).json()
    sid = snap["session_id"]
    assert snap["legal_actions"] == ["shift"]
    assert len(snap["buffer"]["remaining"]) == 2

    snap = http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"}).json()
    assert snap["stack"][0]["symbol"]
    snap = http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"}).json()
    assert sorted(snap["legal_actions"]) == ["reduce", "shift"] or snap[
        "legal_actions"
    ] == ["reduce"]

    text = corpus.texts[[t.id for t in corpus.texts].index(tid)]
    reduce_body = {
        "type": "reduce",
        "parent": "D",
        "roles": ["N", "S"],
        "rhet_rel": "elaboration",
    }
    snap = http.post(f"/v1/sessions/{sid}/action", json=reduce_body).json()
    assert [s["symbol"] for s in snap["stack"]] == ["D"]

    done = http.post(f"/v1/sessions/{sid}/finish")
    assert done.status_code == 200
    body = done.json()
    assert body["productions"] == 1
    assert body["precedence_records"] == 2
    assert body["grammar"]["production_rules"] >= 1
    assert body["budget"]["spent"] == 1

    # actions after finish are rejected
    after = http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    assert after.status_code == 409


def test_illegal_action_409_and_state_kept(client):
    http, corpus, _ = client
    tid = two_edu_text_id(corpus)
    snap = http.post("/v1/sessions", json={"text_id": tid}).json()
    sid = snap["session_id"]
    bad = http.post(
        f"/v1/sessions/{sid}/action",
        json={"type": "reduce", "parent": "D", "roles": ["N", "S"],
              "rhet_rel": "x"},
    )
    assert bad.status_code == 409
    assert "error" in bad.json()
    snap = http.get(f"/v1/sessions/{sid}").json()
    assert snap["buffer"]["position"] == 0


def test_undo_roundtrip(client):
    http, corpus, _ = client
    tid = two_edu_text_id(corpus)
    sid = http.post("/v1/sessions", json={"text_id": tid}).json()["session_id"]
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    snap = http.post(f"/v1/sessions/{sid}/undo").json()
    assert snap["buffer"]["position"] == 0
    assert snap["stack"] == []
    assert http.post(f"/v1/sessions/{sid}/undo").status_code == 409


def test_finish_unfinished_409(client):
    http, corpus, _ = client
    tid = two_edu_text_id(corpus)
    sid = http.post("/v1/sessions", json={"text_id": tid}).json()["session_id"]
    assert http.post(f"/v1/sessions/{sid}/finish").status_code == 409


def test_idempotency_key_replays_response(client):
    http, corpus, _ = client
    tid = two_edu_text_id(corpus)
    headers = {"Idempotency-Key": "abc"}
    first = http.post("/v1/sessions", json={"text_id": tid}, headers=headers)
    second = http.post("/v1/sessions", json={"text_id": tid}, headers=headers)
    assert first.json()["session_id"] == second.json()["session_id"]
    # without the key a new session is created
    third = http.post("/v1/sessions", json={"text_id": tid})
    assert third.json()["session_id"] != first.json()["session_id"]


def test_grammar_endpoints(client):
    http, corpus, _ = client
    stats = http.get("/v1/grammar/stats").json()
    assert stats["production_rules"] == 0
    assert stats["top_rules"] == []
    exported = http.get("/v1/grammar/export")
    assert exported.status_code == 200
    parsed = json.loads(exported.text)
    assert parsed["version"] == 1


def test_learner_report_empty_before_bootstrap(client):
    http, _, _ = client
    assert http.get("/v1/learner/report").json() == {"rows": []}
    assert http.post("/v1/learner/round").status_code == 409


def test_learner_flow(client):
    http, _, _ = client
    booted = http.post("/v1/learner/bootstrap")
    assert booted.status_code == 200, booted.text
    body = booted.json()
    assert body["bootstrap_size"] >= 1
    assert body["budget"]["spent"] == body["bootstrap_size"]
    again = http.post("/v1/learner/bootstrap")
    assert again.status_code == 409

    rounds = http.post("/v1/learner/round")
    assert rounds.status_code == 200
    report = http.get("/v1/learner/report").json()
    labels = [row["label"] for row in report["rows"]]
    assert labels[0] == "Initial"
    assert any(label.startswith("Picking near") for label in labels)
    queue = http.get("/v1/learner/queue").json()
    assert queue == {"queue": []}


def test_budget_exhaustion_blocks_sessions(workdir):
    tmp_path, corpus, _ = workdir
    app = create_app(settings_for(tmp_path, budget=1))
    http = TestClient(app)
    tid = two_edu_text_id(corpus)
    sid = http.post("/v1/sessions", json={"text_id": tid}).json()["session_id"]
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    http.post(
        f"/v1/sessions/{sid}/action",
        json={"type": "reduce", "parent": "D", "roles": ["N", "S"],
              "rhet_rel": "x"},
    )
    assert http.post(f"/v1/sessions/{sid}/finish").status_code == 200
    blocked = http.post("/v1/sessions", json={"text_id": tid})
    assert blocked.status_code == 409
    assert "budget" in blocked.json()


def test_crash_resume_reproduces_snapshot(workdir):
    tmp_path, corpus, _ = workdir
    settings = settings_for(tmp_path)
    app = create_app(settings)
    http = TestClient(app)
    tid = two_edu_text_id(corpus)
    sid = http.post("/v1/sessions", json={"text_id": tid}).json()["session_id"]
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    before = http.get(f"/v1/sessions/{sid}").json()

    resumed = TestClient(create_app(settings))
    after = resumed.get(f"/v1/sessions/{sid}").json()
    before.pop("history")
    after_history = after.pop("history")
    assert after == before
    assert [e["kind"] for e in after_history] == ["shift", "shift"]


def test_crash_resume_after_finish_keeps_grammar(workdir):
    tmp_path, corpus, _ = workdir
    settings = settings_for(tmp_path)
    http = TestClient(create_app(settings))
    tid = two_edu_text_id(corpus)
    sid = http.post("/v1/sessions", json={"text_id": tid}).json()["session_id"]
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    http.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
    http.post(
        f"/v1/sessions/{sid}/action",
        json={"type": "reduce", "parent": "D", "roles": ["N", "S"],
              "rhet_rel": "x"},
    )
    http.post(f"/v1/sessions/{sid}/finish")
    stats_before = http.get("/v1/grammar/stats").json()

    resumed = TestClient(create_app(settings))
    stats_after = resumed.get("/v1/grammar/stats").json()
    assert stats_after == stats_before
    assert resumed.get(f"/v1/sessions/{sid}").json()["finished"] is True
    # budget survived the restart
    assert resumed.get(f"/v1/sessions/{sid}").json()["budget"]["spent"] == 1


def test_clusters_and_summarize(workdir):
    tmp_path, corpus, truth = workdir
    settings = settings_for(tmp_path)
    http = TestClient(create_app(settings))
    booted = http.post("/v1/learner/bootstrap")
    assert booted.status_code == 200
    for _ in range(6):
        if http.post("/v1/learner/round").status_code != 200:
            break
    clusters = http.get("/v1/clusters").json()["clusters"]
    assert clusters
    result = http.post("/v1/summarize", json={"cluster_id": 0, "n": 5})
    assert result.status_code == 200, result.text
    body = result.json()
    assert len(body["summary"]["entries"]) <= 5
    assert 0 <= body["components"]["composite"] <= 100
    missing = http.post("/v1/summarize", json={"cluster_id": 99, "n": 5})
    assert missing.status_code == 404
