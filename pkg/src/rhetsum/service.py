"""HTTP facade for the browser annotator and scripts.

Sessions persist as append-only event logs; the grammar and learner state
are snapshotted after every mutation, so a restart over the same state
directory reproduces every session snapshot from history alone. Mutating
endpoints honor an Idempotency-Key header: a retried key replays the cached
response instead of re-executing.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import metrics as metrics_mod
from .config import ConfigError, get, load_config
from .corpus import Corpus, load_corpus
from .cubes import cluster_for_summarization
from .embedding import EmbeddingTable, Impact, core_vectors_by_text, embed_texts
from .grammar import Grammar
from .learner import (
    BudgetError,
    LearnerConfig,
    LearnerState,
    build_report,
    pick_near,
    bootstrap as learner_bootstrap,
    train_far,
    RoundLog,
)
from .parsing import (
    AnnotationEvent,
    IllegalActionError,
    ParseError,
    ParseState,
    SessionIncompleteError,
    apply_action,
    capture_context,
    finish_session,
    replay,
    start_session,
)
from .summarize import SummarizationError, summarize_cluster
from .teacher import GroundTruth, ScriptedTeacher


class ServiceError(Exception):
    pass


@dataclass
class ServiceSettings:
    corpus_path: str
    state_dir: str
    table_path: str | None = None
    grammar_path: str | None = None
    ground_truth_path: str | None = None
    budget: int = 1000
    epsilon: float = 1.0
    k: int = 25
    q: int = 3
    selection_mode: str = "fixed"
    seed: int = 0
    cluster_target: int = 120
    summary_decay: float = 0.8
    lexicon_path: str | None = None

    @classmethod
    def from_config(cls, path: str | Path) -> "ServiceSettings":
        cfg = load_config(path)
        corpus_path = get(cfg, "paths", "corpus")
        state_dir = get(cfg, "paths", "state_dir")
        if not corpus_path or not state_dir:
            raise ConfigError(
                "missing config key [paths] corpus or [paths] state_dir"
            )
        return cls(
            corpus_path=str(corpus_path),
            state_dir=str(state_dir),
            table_path=get(cfg, "paths", "table"),
            grammar_path=get(cfg, "paths", "grammar"),
            ground_truth_path=get(cfg, "paths", "ground_truth"),
            budget=int(get(cfg, "learner", "budget", 1000)),
            epsilon=float(get(cfg, "learner", "epsilon", 1.0)),
            k=int(get(cfg, "learner", "k", 25)),
            q=int(get(cfg, "learner", "q", 3)),
            selection_mode=str(get(cfg, "learner", "mode", "fixed")),
            seed=int(get(cfg, "learner", "seed", 0)),
            cluster_target=int(get(cfg, "cubes", "cluster_target", 120)),
            summary_decay=float(get(cfg, "summarizer", "decay", 0.8)),
            lexicon_path=get(cfg, "metrics", "lexicon"),
        )


@dataclass
class Session:
    session_id: str
    state: ParseState
    log_path: Path
    finished: bool = False
    tree_bracket: str | None = None


class Service:
    """All mutable server state plus its on-disk persistence."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.corpus: Corpus = load_corpus(settings.corpus_path)
        self.table: EmbeddingTable | None = (
            EmbeddingTable.load(settings.table_path)
            if settings.table_path and Path(settings.table_path).exists()
            else None
        )
        self.truth: GroundTruth | None = (
            GroundTruth.load(settings.ground_truth_path)
            if settings.ground_truth_path
            and Path(settings.ground_truth_path).exists()
            else None
        )
        self.state_dir = Path(settings.state_dir)
        self.sessions_dir = self.state_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.grammar_snapshot = self.state_dir / "grammar.json"
        self.learner_snapshot = self.state_dir / "learner.json"

        if self.grammar_snapshot.exists():
            self.grammar = Grammar.load(self.grammar_snapshot)
        elif settings.grammar_path and Path(settings.grammar_path).exists():
            self.grammar = Grammar.load(settings.grammar_path)
        else:
            self.grammar = Grammar()

        self.impacts: list[Impact] | None = None
        self.clusters: list[list[Impact]] | None = None
        self.learner_state: LearnerState | None = None
        self.sessions: dict[str, Session] = {}
        self.manual_finished = 0
        self.idempotency: dict[str, tuple[int, Any]] = {}

        self._resume_learner()
        self._resume_sessions()

    # -- persistence -------------------------------------------------------

    def _resume_learner(self) -> None:
        if not self.learner_snapshot.exists():
            return
        impacts = {imp.text_id: imp for imp in self._ensure_impacts()}
        self.learner_state = LearnerState.load(self.learner_snapshot, impacts)

    def _resume_sessions(self) -> None:
        for log_path in sorted(self.sessions_dir.glob("*.log")):
            events: list[AnnotationEvent] = []
            meta: dict | None = None
            finished = False
            with log_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    if "meta" in record:
                        meta = record["meta"]
                    elif record.get("undo"):
                        if events:
                            events.pop()
                    elif record.get("finished"):
                        finished = True
                    elif "event" in record:
                        events.append(AnnotationEvent.from_dict(record["event"]))
            if meta is None:
                continue
            text = self.corpus.text_by_id(meta["text_id"])
            state = replay(text, events, grammar=self.grammar)
            session = Session(
                session_id=meta["session_id"], state=state, log_path=log_path
            )
            if finished:
                # Rules were merged before the crash/restart; the snapshot
                # grammar already carries them, so only mark the session.
                state.closed = True
                session.finished = True
                session.tree_bracket = (
                    state.stack[0].bracket() if state.depth == 1 else None
                )
                self.manual_finished += 1
            self.sessions[session.session_id] = session

    def _append_log(self, session: Session, record: dict) -> None:
        with session.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False,
                                separators=(",", ":")))
            fh.write("\n")

    def _save_grammar(self) -> None:
        self.grammar.save(self.grammar_snapshot)

    def _save_learner(self) -> None:
        if self.learner_state is not None:
            self.learner_state.save(self.learner_snapshot)

    # -- learner helpers ----------------------------------------------------

    def _ensure_impacts(self) -> list[Impact]:
        if self.impacts is None:
            if self.table is None:
                raise ServiceError(
                    "no embedding table configured; run the embed step first"
                )
            self.impacts = embed_texts(self.corpus, self.table)
        return self.impacts

    def _ensure_clusters(self) -> list[list[Impact]]:
        if self.clusters is None:
            self.clusters = cluster_for_summarization(
                self._ensure_impacts(), target=self.settings.cluster_target
            )
        return self.clusters

    def _teacher(self) -> ScriptedTeacher:
        if self.truth is None:
            raise ServiceError(
                "no ground truth configured; simulated annotation unavailable"
            )
        return ScriptedTeacher(self.truth)

    def budget_report(self) -> dict:
        spent = self.manual_finished + (
            self.learner_state.budget_spent if self.learner_state else 0
        )
        return {
            "limit": self.settings.budget,
            "spent": spent,
            "remaining": max(0, self.settings.budget - spent),
        }

    # -- snapshots -----------------------------------------------------------

    def snapshot(self, session: Session) -> dict:
        state = session.state
        candidates = []
        if state.depth >= 2 and not session.finished:
            context = capture_context(state)
            for rule, prob in self.grammar.reduce_distribution(
                state.stack[-2].symbol, state.stack[-1].symbol, context
            ):
                candidates.append(
                    {
                        "parent": rule.parent,
                        "roles": list(rule.roles),
                        "rhet_rel": rule.rhet_rel,
                        "ae": rule.ae,
                        "probability": prob,
                        "rule_key": rule.key(),
                    }
                )
        return {
            "session_id": session.session_id,
            "text_id": state.text.id,
            "finished": session.finished,
            "stack": [
                {
                    "symbol": node.symbol,
                    "digest": node.digest(),
                    "rhet_rel": node.rhet_rel,
                    "leaf_count": node.leaf_count(),
                }
                for node in state.stack
            ],
            "buffer": {
                "position": state.pos,
                "remaining": list(state.terminals[state.pos:]),
                "lookahead": state.lookahead(),
            },
            "legal_actions": state.legal_actions(),
            "reduce_candidates": candidates,
            "history": [e.to_dict() for e in state.history],
            "budget": self.budget_report(),
            "tree": session.tree_bracket,
        }


def _error(status: int, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": message, **extra}
    )


def create_app(settings: ServiceSettings) -> FastAPI:
    service = Service(settings)
    app = FastAPI(title="rhetsum", version="0.1.0")
    app.state.service = service

    def idempotent(request: Request, compute):
        key = request.headers.get("Idempotency-Key")
        if key:
            cache_key = f"{request.method} {request.url.path} {key}"
            if cache_key in service.idempotency:
                status, content = service.idempotency[cache_key]
                return JSONResponse(status_code=status, content=content)
        response = compute()
        if key:
            if isinstance(response, JSONResponse):
                service.idempotency[cache_key] = (
                    response.status_code,
                    json.loads(bytes(response.body).decode("utf-8")),
                )
            else:
                service.idempotency[cache_key] = (200, response)
        return response

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "texts": len(service.corpus.texts)}

    # -- sessions ----------------------------------------------------------

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = await request.json()

        def compute():
            text_id = body.get("text_id")
            try:
                text = service.corpus.text_by_id(text_id)
            except KeyError:
                return _error(404, f"unknown text id {text_id!r}")
            budget = service.budget_report()
            if budget["remaining"] <= 0:
                return _error(409, "annotation budget exhausted",
                              budget=budget)
            session_id = uuid.uuid4().hex[:12]
            session = Session(
                session_id=session_id,
                state=start_session(text, grammar=service.grammar),
                log_path=service.sessions_dir / f"{session_id}.log",
            )
            service.sessions[session_id] = session
            service._append_log(
                session,
                {"meta": {"session_id": session_id, "text_id": text_id,
                          "created": time.time()}},
            )
            return JSONResponse(service.snapshot(session))

        return idempotent(request, compute)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = service.sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        return JSONResponse(service.snapshot(session))

    @app.post("/v1/sessions/{session_id}/action")
    async def post_action(session_id: str, request: Request):
        body = await request.json()

        def compute():
            session = service.sessions.get(session_id)
            if session is None:
                return _error(404, f"unknown session {session_id!r}")
            if session.finished:
                return _error(409, "session is finished")
            kind = body.get("type")
            try:
                if kind == "shift":
                    event = AnnotationEvent(
                        kind="shift", author="human", timestamp=time.time()
                    )
                elif kind == "reduce":
                    event = AnnotationEvent(
                        kind="reduce",
                        parent=body.get("parent"),
                        roles=tuple(body.get("roles", ())),
                        rhet_rel=body.get("rhet_rel"),
                        ae=body.get("ae"),
                        author="human",
                        timestamp=time.time(),
                    )
                else:
                    return _error(409, f"unknown action type {kind!r}")
                apply_action(session.state, event)
            except (IllegalActionError, ParseError) as exc:
                return _error(409, str(exc))
            service._append_log(session, {"event": event.to_dict()})
            return JSONResponse(service.snapshot(session))

        return idempotent(request, compute)

    @app.post("/v1/sessions/{session_id}/undo")
    def post_undo(session_id: str, request: Request):
        def compute():
            session = service.sessions.get(session_id)
            if session is None:
                return _error(404, f"unknown session {session_id!r}")
            if session.finished:
                return _error(409, "session is finished")
            if not session.state.history:
                return _error(409, "nothing to undo")
            session.state = replay(
                session.state.text,
                session.state.history[:-1],
                grammar=service.grammar,
            )
            service._append_log(session, {"undo": True})
            return JSONResponse(service.snapshot(session))

        return idempotent(request, compute)

    @app.post("/v1/sessions/{session_id}/finish")
    def post_finish(session_id: str, request: Request):
        def compute():
            session = service.sessions.get(session_id)
            if session is None:
                return _error(404, f"unknown session {session_id!r}")
            if session.finished:
                return _error(409, "session is already finished")
            try:
                tree, rules = finish_session(session.state)
            except (SessionIncompleteError, IllegalActionError) as exc:
                return _error(409, str(exc))
            session.finished = True
            session.tree_bracket = tree.bracket()
            service.manual_finished += 1
            service._append_log(session, {"finished": True})
            service._save_grammar()
            return JSONResponse(
                {
                    "session_id": session_id,
                    "tree": tree.bracket(),
                    "productions": len(rules.productions),
                    "precedence_records": len(rules.precedences),
                    "rule_keys": list(rules.rule_keys()),
                    "grammar": service.grammar.stats(),
                    "budget": service.budget_report(),
                }
            )

        return idempotent(request, compute)

    # -- grammar -------------------------------------------------------------

    @app.get("/v1/grammar/stats")
    def grammar_stats():
        stats = service.grammar.stats()
        stats["top_rules"] = service.grammar.top_rules(10)
        return JSONResponse(stats)

    @app.get("/v1/grammar/export")
    def grammar_export():
        return Response(
            content=service.grammar.dumps(), media_type="application/json"
        )

    # -- learner ---------------------------------------------------------------

    @app.post("/v1/learner/bootstrap")
    def learner_bootstrap_ep(request: Request):
        def compute():
            if service.learner_state is not None:
                return _error(409, "learner already bootstrapped")
            try:
                impacts = service._ensure_impacts()
                teacher = service._teacher()
                cfg = LearnerConfig(
                    epsilon=service.settings.epsilon,
                    k=service.settings.k,
                    budget=service.settings.budget,
                    q=service.settings.q,
                    selection_mode=service.settings.selection_mode,
                    seed=service.settings.seed,
                )
                cores = (
                    core_vectors_by_text(service.corpus, service.table)
                    if service.table
                    else None
                )
                grammar, state = learner_bootstrap(
                    service.corpus, impacts, cfg, teacher,
                    grammar=service.grammar, cores_by_text=cores,
                )
            except BudgetError as exc:
                return _error(409, str(exc), budget=service.budget_report())
            except ServiceError as exc:
                return _error(409, str(exc))
            service.learner_state = state
            service._save_grammar()
            service._save_learner()
            return JSONResponse(
                {
                    "bootstrap_size": state.bootstrap_size,
                    "budget": service.budget_report(),
                    "grammar": service.grammar.stats(),
                }
            )

        return idempotent(request, compute)

    @app.post("/v1/learner/round")
    def learner_round(request: Request):
        def compute():
            state = service.learner_state
            if state is None:
                return _error(409, "bootstrap the learner first")
            budget = service.budget_report()
            if budget["remaining"] <= 0:
                return _error(409, "annotation budget exhausted",
                              budget=budget)
            try:
                teacher = service._teacher()
            except ServiceError as exc:
                return _error(409, str(exc))
            picked = len(
                pick_near(
                    state, service.grammar, service.corpus,
                    service.settings.epsilon,
                )
            )
            trained = train_far(
                state, service.grammar, service.corpus, service.settings.k,
                teacher,
            )
            state.rounds.append(
                RoundLog(
                    round=len(state.rounds) + 1,
                    picked_near=picked,
                    trained_far=trained,
                    labeled_total=len(state.labeled),
                    budget_spent=state.budget_spent,
                )
            )
            service._save_grammar()
            service._save_learner()
            return JSONResponse(
                {
                    "round": len(state.rounds),
                    "picked_near": picked,
                    "trained_far": trained,
                    "budget": service.budget_report(),
                    "grammar": service.grammar.stats(),
                }
            )

        return idempotent(request, compute)

    @app.get("/v1/learner/report")
    def learner_report():
        if service.learner_state is None:
            return JSONResponse({"rows": []})
        return JSONResponse(
            build_report(service.learner_state, service.grammar).to_json_dict()
        )

    @app.get("/v1/learner/queue")
    def learner_queue():
        # Simulated annotation completes rounds synchronously, so the human
        # queue is empty unless a round is pending (not yet supported).
        return JSONResponse({"queue": []})

    # -- clusters and summarization -----------------------------------------

    @app.get("/v1/clusters")
    def clusters():
        try:
            groups = service._ensure_clusters()
        except ServiceError as exc:
            return _error(409, str(exc))
        return JSONResponse(
            {
                "clusters": [
                    {"cluster_id": i, "size": len(group)}
                    for i, group in enumerate(groups)
                ]
            }
        )

    @app.post("/v1/summarize")
    async def summarize_ep(request: Request):
        body = await request.json()

        def compute():
            try:
                groups = service._ensure_clusters()
            except ServiceError as exc:
                return _error(409, str(exc))
            cluster_id = body.get("cluster_id", 0)
            n = body.get("n", 10)
            if not isinstance(cluster_id, int) or not (
                0 <= cluster_id < len(groups)
            ):
                return _error(404, f"unknown cluster id {cluster_id!r}")
            texts = [
                service.corpus.text_by_id(imp.text_id)
                for imp in groups[cluster_id]
            ]
            try:
                summary = summarize_cluster(
                    texts, service.grammar, service.table, int(n),
                    decay=service.settings.summary_decay,
                )
            except SummarizationError as exc:
                return _error(409, str(exc), reports=exc.reports)
            model = (
                metrics_mod.LexiconSentiment.from_file(
                    service.settings.lexicon_path
                )
                if service.settings.lexicon_path
                and Path(service.settings.lexicon_path).exists()
                else metrics_mod.LexiconSentiment()
            )
            components = metrics_mod.evaluate_summary(summary, texts, model)
            return JSONResponse(
                {
                    "summary": summary.to_json_dict(),
                    "components": components.to_dict(),
                }
            )

        return idempotent(request, compute)

    return app


def main() -> None:  # pragma: no cover - thin uvicorn wrapper
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="rhetsum annotation service")
    parser.add_argument("--config", required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    app = create_app(ServiceSettings.from_config(args.config))
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":  # pragma: no cover
    main()
