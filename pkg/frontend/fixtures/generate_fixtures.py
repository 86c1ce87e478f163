"""Record contract fixtures for the frontend tests.

Produces, next to this script:
  corpus.jsonl / truth.jsonl / table.bin - the fixture dataset
  snapshots.json      - 50+ session snapshots captured from the live service
  counters.json       - raw response bodies for the dashboard byte checks
  expected_delta.json - grammar produced by the scripted teacher completing
                        the 2-EDU fixture headlessly

Run from the repository root with src/ on PYTHONPATH:
  PYTHONPATH=src python3 frontend/fixtures/generate_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from rhetsum.corpus import Corpus, DocText, Edu, LexicalCore, save_corpus
from rhetsum.embedding import TrainConfig, train
from rhetsum.grammar import Grammar
from rhetsum.learner import run_annotation_session
from rhetsum.service import ServiceSettings, create_app
from rhetsum.teacher import (
    GroundTruth,
    ScriptedTeacher,
    default_oracle,
    derivation_events,
    generate,
)
from rhetsum.parsing import RsNode

HERE = Path(__file__).resolve().parent

PAIR_TREE = RsNode(
    symbol="STATEMENT",
    rhet_rel="elaboration",
    roles=("N", "S"),
    children=(
        RsNode(symbol="opens", edu_id="e1"),
        RsNode(symbol="closes", edu_id="e2"),
    ),
)


def pair_text() -> DocText:
    edus = (
        Edu(id="e1", tokens=("now", "ann", "topic", "opens"),
            ne_tags=("ann",), raw="now ann topic opens"),
        Edu(id="e2", tokens=("now", "bob", "topic", "closes"),
            ne_tags=("bob",), raw="now bob topic closes"),
    )
    cores = (
        LexicalCore(t="now", a="ann", o="topic", s="opens", edu_id="e1"),
        LexicalCore(t="now", a="bob", o="topic", s="closes", edu_id="e2"),
    )
    return DocText(id="pair", edus=edus, cores=cores, domain="fixture")


def main() -> None:
    corpus, truth = generate(default_oracle(ambiguous_weight=0.05), 12, seed=17)
    corpus = Corpus.from_texts(list(corpus.texts) + [pair_text()])
    truth.trees["pair"] = PAIR_TREE
    truth.events["pair"] = tuple(derivation_events(PAIR_TREE))
    truth.topics["pair"] = "fixture"

    save_corpus(corpus, HERE / "corpus.jsonl")
    truth.save(HERE / "truth.jsonl")
    table = train(corpus, TrainConfig(dim=6, epochs=4, seed=0, batch_size=64))
    table.save(HERE / "table.bin")

    # Headless teacher delta for the 2-EDU fixture: an empty grammar plus
    # exactly one completed session.
    delta_grammar = Grammar()
    run_annotation_session(
        corpus.text_by_id("pair"), ScriptedTeacher(truth),
        grammar=delta_grammar,
    )
    (HERE / "expected_delta.json").write_text(
        delta_grammar.dumps(), encoding="utf-8"
    )

    with tempfile.TemporaryDirectory() as tmp:
        settings = ServiceSettings(
            corpus_path=str(HERE / "corpus.jsonl"),
            state_dir=str(Path(tmp) / "state"),
            table_path=str(HERE / "table.bin"),
            ground_truth_path=str(HERE / "truth.jsonl"),
            budget=200,
            epsilon=20.0,
            k=5,
            q=4,
            seed=0,
            cluster_target=40,
        )
        client = TestClient(create_app(settings))
        snapshots: list[dict] = []
        teacher = ScriptedTeacher(truth)

        for text in corpus.texts:
            if len(snapshots) >= 48:
                break
            created = client.post("/v1/sessions", json={"text_id": text.id})
            snapshot = created.json()
            snapshots.append(snapshot)
            sid = snapshot["session_id"]
            for event in truth.events[text.id]:
                if event.kind == "shift":
                    body = {"type": "shift"}
                else:
                    body = {
                        "type": "reduce",
                        "parent": event.parent,
                        "roles": list(event.roles),
                        "rhet_rel": event.rhet_rel,
                    }
                snapshot = client.post(
                    f"/v1/sessions/{sid}/action", json=body
                ).json()
                snapshots.append(snapshot)
            client.post(f"/v1/sessions/{sid}/finish")
            snapshots.append(client.get(f"/v1/sessions/{sid}").json())

        # one undo mid-session for variety
        created = client.post(
            "/v1/sessions", json={"text_id": corpus.texts[0].id}
        ).json()
        sid = created["session_id"]
        client.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
        client.post(f"/v1/sessions/{sid}/action", json={"type": "shift"})
        snapshots.append(client.post(f"/v1/sessions/{sid}/undo").json())
        assert len(snapshots) >= 50, len(snapshots)
        (HERE / "snapshots.json").write_text(
            json.dumps(snapshots[:60], ensure_ascii=False, indent=1),
            encoding="utf-8",
        )

        client.post("/v1/learner/bootstrap")
        client.post("/v1/learner/round")
        stats_raw = client.get("/v1/grammar/stats").text
        report_raw = client.get("/v1/learner/report").text
        budget_raw = client.get(f"/v1/sessions/{sid}").text
        (HERE / "counters.json").write_text(
            json.dumps(
                {
                    "grammar_stats_raw": stats_raw,
                    "learner_report_raw": report_raw,
                    "session_raw": budget_raw,
                },
                ensure_ascii=False,
                indent=1,
            ),
            encoding="utf-8",
        )

    print(f"wrote fixtures to {HERE} ({len(snapshots[:60])} snapshots)")


if __name__ == "__main__":
    sys.exit(main())
