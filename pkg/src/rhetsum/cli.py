"""Batch pipeline entry points.

Every subcommand reads one config file (see docs/config-format.md) plus a
few flags, writes machine-readable JSON errors to stderr, and exits nonzero
on failure.
"""

from __future__ import annotations

import functools
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import metrics as metrics_mod
from .config import ConfigError, get, load_config, require
from .corpus import CorpusError, load_corpus, save_corpus, vocab_stats
from .cubes import (
    build_grid,
    choose_divisions,
    cluster_for_summarization,
    divergences_for,
    select_representatives,
)
from .embedding import (
    EmbeddingError,
    EmbeddingTable,
    TrainConfig,
    core_vectors_by_text,
    embed_texts,
    train,
)
from .grammar import Grammar, GrammarError
from .learner import (
    LearnerConfig,
    LearnerError,
    LearnerState,
    bootstrap,
    resume as learner_resume,
    run as learner_run,
)
from .parsing import ParseError
from .summarize import SummarizationError, summarize_cluster
from .teacher import GroundTruth, ScriptedTeacher, default_oracle, generate

_ERRORS = (
    ConfigError,
    CorpusError,
    EmbeddingError,
    GrammarError,
    LearnerError,
    ParseError,
    SummarizationError,
    FileNotFoundError,
)


def _fail(exc: Exception) -> None:
    sys.stderr.write(
        json.dumps(
            {"error": type(exc).__name__, "message": str(exc)},
            ensure_ascii=False,
        )
        + "\n"
    )
    raise SystemExit(1)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _ERRORS as exc:
            _fail(exc)

    return wrapper


def _echo_json(payload: dict) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1))


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        dim=int(get(cfg, "embedding", "dim", 150)),
        margin=float(get(cfg, "embedding", "margin", 2.0)),
        norm=str(get(cfg, "embedding", "norm", "l1")),
        learning_rate=float(get(cfg, "embedding", "learning_rate", 0.001)),
        epochs=int(get(cfg, "embedding", "epochs", 20)),
        batch_size=int(get(cfg, "embedding", "batch_size", 64)),
        seed=int(get(cfg, "embedding", "seed", 0)),
    )


def _learner_config(cfg: dict) -> LearnerConfig:
    divisions = get(cfg, "cubes", "divisions")
    return LearnerConfig(
        epsilon=float(require(cfg, "learner", "epsilon")),
        k=int(require(cfg, "learner", "k")),
        budget=int(require(cfg, "learner", "budget")),
        q=int(get(cfg, "learner", "q", 3)),
        selection_mode=str(get(cfg, "learner", "mode", "fixed")),
        seed=int(get(cfg, "learner", "seed", 0)),
        divisions=tuple(int(x) for x in divisions) if divisions else None,
    )


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@click.group()
def main() -> None:
    """Grammar-learning summarization pipeline."""


@main.command("generate")
@click.option("--config", "config_path", required=True, type=click.Path())
@guarded
def generate_cmd(config_path: str) -> None:
    """Generate a synthetic corpus plus ground truth from the built-in
    oracle (for simulated teaching and desk-scale experiments)."""
    cfg = load_config(config_path)
    n_texts = int(require(cfg, "teacher", "n_texts"))
    seed = int(get(cfg, "teacher", "seed", 0))
    amb = float(get(cfg, "teacher", "ambiguous_weight", 0.25))
    corpus_out = Path(require(cfg, "paths", "corpus"))
    truth_out = Path(require(cfg, "paths", "ground_truth"))
    corpus, truth = generate(default_oracle(ambiguous_weight=amb), n_texts, seed)
    corpus_out.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, corpus_out)
    truth.save(truth_out)
    _echo_json(
        {"texts": len(corpus.texts), "corpus": str(corpus_out),
         "ground_truth": str(truth_out)}
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@guarded
def ingest(config_path: str) -> None:
    """Validate the corpus file and print vocabulary statistics."""
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    _echo_json(vocab_stats(corpus).to_dict())


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@guarded
def embed(config_path: str) -> None:
    """Train the core embedding table and write it to disk."""
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    table_path = Path(require(cfg, "paths", "table"))
    table = train(corpus, _train_config(cfg))
    table_path.parent.mkdir(parents=True, exist_ok=True)
    table.save(table_path)
    _echo_json(
        {
            "table": str(table_path),
            "dim": table.dim,
            "epoch_losses": list(table.training_losses),
        }
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
@guarded
def select(config_path: str, out_path: str | None) -> None:
    """Pick representative texts cube by cube and report grid statistics."""
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    table = EmbeddingTable.load(require(cfg, "paths", "table"))
    impacts = [imp for imp in embed_texts(corpus, table) if imp.has_cores]
    q = int(get(cfg, "learner", "q", 3))
    mode = str(get(cfg, "learner", "mode", "fixed"))
    seed = int(get(cfg, "learner", "seed", 0))
    divisions = get(cfg, "cubes", "divisions") or choose_divisions(impacts, q)
    grid = build_grid(
        impacts, core_vectors_by_text(corpus, table),
        tuple(int(x) for x in divisions),
    )
    divergences = divergences_for(grid)
    stats = grid.stats(divergences)
    picks = select_representatives(
        grid, divergences, mode, q, np.random.default_rng(seed)
    )
    payload = {
        "selected": [
            {"text_id": p.text_id, "weight": p.weight,
             "divergence": p.divergence}
            for p in picks
        ],
        "grid": stats,
    }
    if out_path:
        Path(out_path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1),
            encoding="utf-8",
        )
    _echo_json(payload)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--simulated", is_flag=True, default=False,
              help="Answer annotation queries from the stored ground truth.")
@guarded
def teach(config_path: str, simulated: bool) -> None:
    """Annotate the bootstrap selection into an initial grammar."""
    if not simulated:
        _fail(
            ConfigError(
                "interactive teaching runs through the service; pass "
                "--simulated for the scripted teacher"
            )
        )
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    table = EmbeddingTable.load(require(cfg, "paths", "table"))
    truth = GroundTruth.load(require(cfg, "paths", "ground_truth"))
    grammar_path = Path(require(cfg, "paths", "grammar"))
    impacts = embed_texts(corpus, table)
    grammar, state = bootstrap(
        corpus, impacts, _learner_config(cfg), ScriptedTeacher(truth),
        cores_by_text=core_vectors_by_text(corpus, table),
    )
    grammar_path.parent.mkdir(parents=True, exist_ok=True)
    grammar.save(grammar_path)
    _echo_json(
        {
            "grammar": str(grammar_path),
            "bootstrap_size": state.bootstrap_size,
            "budget_spent": state.budget_spent,
            "stats": grammar.stats(),
        }
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--resume", "resume_run", is_flag=True, default=False,
              help="Continue from the saved checkpoint and grammar.")
@guarded
def learn(config_path: str, resume_run: bool) -> None:
    """Full incremental run: bootstrap plus pick-near / train-far rounds."""
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    table = EmbeddingTable.load(require(cfg, "paths", "table"))
    truth = GroundTruth.load(require(cfg, "paths", "ground_truth"))
    grammar_path = Path(require(cfg, "paths", "grammar"))
    report_path = Path(get(cfg, "paths", "report", str(grammar_path) + ".report.json"))
    checkpoint = get(cfg, "paths", "checkpoint")
    impacts = embed_texts(corpus, table)
    if resume_run:
        if not checkpoint or not Path(checkpoint).exists():
            raise LearnerError(
                "--resume needs an existing [paths] checkpoint file"
            )
        state = LearnerState.load(
            checkpoint, {imp.text_id: imp for imp in impacts}
        )
        grammar, state, report = learner_resume(
            corpus, _learner_config(cfg), ScriptedTeacher(truth),
            Grammar.load(grammar_path), state,
        )
    else:
        grammar, state, report = learner_run(
            corpus, impacts, _learner_config(cfg), ScriptedTeacher(truth),
            cores_by_text=core_vectors_by_text(corpus, table),
        )
    grammar_path.parent.mkdir(parents=True, exist_ok=True)
    grammar.save(grammar_path)
    report_path.write_text(
        json.dumps(report.to_json_dict(), ensure_ascii=False, sort_keys=True,
                   indent=1) + "\n",
        encoding="utf-8",
    )
    Path(str(report_path) + ".csv").write_text(report.to_csv(),
                                               encoding="utf-8")
    if checkpoint:
        state.save(checkpoint)
    _echo_json(
        {
            "grammar": str(grammar_path),
            "grammar_sha256": _sha256(grammar_path),
            "report": str(report_path),
            "labeled": len(state.labeled),
            "budget_spent": state.budget_spent,
            "stats": grammar.stats(),
        }
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("-n", "n_edus", type=int, default=None)
@click.option("--cluster", "cluster_id", type=int, default=0)
@guarded
def summarize(config_path: str, n_edus: int | None, cluster_id: int) -> None:
    """Summarize one cluster into JSON plus one EDU per line."""
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    table = EmbeddingTable.load(require(cfg, "paths", "table"))
    grammar = Grammar.load(require(cfg, "paths", "grammar"))
    out_base = Path(require(cfg, "paths", "summary"))
    n = n_edus if n_edus is not None else int(get(cfg, "summarizer", "n", 10))
    decay = float(get(cfg, "summarizer", "decay", 0.8))
    target = int(get(cfg, "cubes", "cluster_target", 120))
    impacts = embed_texts(corpus, table)
    groups = cluster_for_summarization(impacts, target=target)
    if not (0 <= cluster_id < len(groups)):
        _fail(SummarizationError(f"unknown cluster id {cluster_id}"))
    texts = [corpus.text_by_id(imp.text_id) for imp in groups[cluster_id]]
    raw_divisions = get(cfg, "summarizer", "divisions")
    divisions = (
        tuple(int(x) for x in raw_divisions) if raw_divisions else None
    )
    summary = summarize_cluster(texts, grammar, table, n, decay=decay,
                                divisions=divisions)
    out_base.parent.mkdir(parents=True, exist_ok=True)
    json_path = Path(str(out_base) + ".json")
    text_path = Path(str(out_base) + ".txt")
    json_path.write_text(summary.to_json(), encoding="utf-8")
    text_path.write_text(summary.to_text(), encoding="utf-8")
    _echo_json(
        {
            "summary_json": str(json_path),
            "summary_text": str(text_path),
            "summary_sha256": _sha256(json_path),
            "edus": len(summary.entries),
            "cluster_size": len(texts),
        }
    )


def _load_summary(summary_path: str):
    from .summarize import Summary, SummaryEntry

    data = json.loads(Path(summary_path).read_text(encoding="utf-8"))
    return Summary(
        entries=tuple(
            SummaryEntry(
                text_id=e["text_id"],
                edu_id=e["edu_id"],
                text_weight=e["text_weight"],
                edu_rank=e["edu_rank"],
                priority=e["priority"],
                tokens=tuple(e["tokens"]),
                ne_tags=tuple(e["ne_tags"]),
                raw=e["raw"],
            )
            for e in data["entries"]
        ),
        requested_n=data["requested_n"],
    )


def _metric_options(cfg: dict):
    raw_weights = get(cfg, "metrics", "weights", list(metrics_mod.DEFAULT_WEIGHTS))
    weights = tuple(float(w) for w in raw_weights)
    ne_mode = str(get(cfg, "metrics", "ne_mode", "coverage"))
    lexicon = get(cfg, "metrics", "lexicon")
    model = (
        metrics_mod.LexiconSentiment.from_file(lexicon)
        if lexicon and Path(lexicon).exists()
        else metrics_mod.LexiconSentiment()
    )
    return weights, ne_mode, model


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--summary", "summary_path", type=click.Path(), default=None)
@click.option("--cluster", "cluster_id", type=int, default=0)
@click.option("--all-clusters", "all_clusters", is_flag=True, default=False,
              help="Summarize and score every cluster; write a CSV report.")
@guarded
def evaluate(config_path: str, summary_path: str | None, cluster_id: int,
             all_clusters: bool) -> None:
    """Score a saved summary against its cluster, or sweep all clusters."""
    cfg = load_config(config_path)
    corpus = load_corpus(require(cfg, "paths", "corpus"))
    table = EmbeddingTable.load(require(cfg, "paths", "table"))
    target = int(get(cfg, "cubes", "cluster_target", 120))
    weights, ne_mode, model = _metric_options(cfg)
    impacts = embed_texts(corpus, table)
    groups = cluster_for_summarization(impacts, target=target)

    if all_clusters:
        grammar = Grammar.load(require(cfg, "paths", "grammar"))
        n = int(get(cfg, "summarizer", "n", 10))
        decay = float(get(cfg, "summarizer", "decay", 0.8))
        rows = []
        reports = []
        for idx, group in enumerate(groups):
            texts = [corpus.text_by_id(imp.text_id) for imp in group]
            summary = summarize_cluster(texts, grammar, table, n, decay=decay)
            scores = metrics_mod.evaluate_summary(
                summary, texts, model, weights=weights, ne_mode=ne_mode
            )
            rows.append((idx, scores))
            reports.append({"cluster_id": idx, **scores.to_dict()})
        csv_path = Path(
            get(cfg, "paths", "metrics_csv",
                str(get(cfg, "paths", "summary", "summary")) + ".metrics.csv")
        )
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(metrics_mod.components_csv(rows),
                            encoding="utf-8")
        _echo_json({"clusters": reports, "csv": str(csv_path)})
        return

    if not summary_path:
        _fail(ConfigError("pass --summary FILE or --all-clusters"))
    summary = _load_summary(summary_path)
    if not (0 <= cluster_id < len(groups)):
        _fail(SummarizationError(f"unknown cluster id {cluster_id}"))
    texts = [corpus.text_by_id(imp.text_id) for imp in groups[cluster_id]]
    components = metrics_mod.evaluate_summary(
        summary, texts, model, weights=weights, ne_mode=ne_mode
    )
    _echo_json(components.to_dict())


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@guarded
def serve(config_path: str, host: str, port: int) -> None:
    """Run the annotation service."""
    import uvicorn

    from .service import ServiceSettings, create_app

    app = create_app(ServiceSettings.from_config(config_path))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":  # pragma: no cover
    main()
