"""Incremental grammar learning under a labeling budget.

Bootstrap selects representatives cube by cube and has the annotator parse
them into an initial grammar. Each following round first transfer-labels
every unlabeled impact within epsilon of the labeled set (enhance: existing
counts grow, the rule-type key set does not), then spends budget annotating
the impacts farthest from the labeled set (increase: new rule types may
appear). Only annotator-labeled texts are charged against the budget.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, DocText
from .cubes import (
    build_grid,
    choose_divisions,
    divergences_for,
    nearest_distance,
    select_representatives,
)
from .embedding import Impact
from .grammar import Grammar
from .parsing import (
    AnnotationEvent,
    ParseFailure,
    ParseState,
    RsNode,
    SessionRules,
    apply_action,
    finish_session,
    parse_outcome,
    start_session,
)

Annotator = Callable[[ParseState], AnnotationEvent]


class LearnerError(Exception):
    pass


class BudgetError(LearnerError):
    pass


@dataclass
class LearnerConfig:
    epsilon: float
    k: int
    budget: int
    q: int = 3
    selection_mode: str = "fixed"
    seed: int = 0
    divisions: tuple[int, int, int, int] | None = None
    norm: str = "l1"

    def __post_init__(self) -> None:
        if self.epsilon <= 0 or self.k <= 0 or self.q <= 0:
            raise LearnerError("epsilon, k and q must be positive")
        if self.budget < 0:
            raise LearnerError("budget must be nonnegative")
        if self.selection_mode not in ("fixed", "percentage"):
            raise LearnerError(
                f"unknown selection mode {self.selection_mode!r}"
            )


@dataclass
class LabeledText:
    """How a text entered the labeled set and what it can contribute when a
    neighbor is transfer-labeled off it."""

    text_id: str
    source: str  # "annotated" | "transfer" | "weak"
    tree_digest: str | None = None
    rule_keys: tuple[str, ...] = ()
    precedence_uses: tuple[tuple[tuple[str, str, str], str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "text_id": self.text_id,
            "source": self.source,
            "tree_digest": self.tree_digest,
            "rule_keys": list(self.rule_keys),
            "precedence_uses": [
                [list(triple), direction]
                for triple, direction in self.precedence_uses
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LabeledText":
        return cls(
            text_id=data["text_id"],
            source=data["source"],
            tree_digest=data.get("tree_digest"),
            rule_keys=tuple(data.get("rule_keys", ())),
            precedence_uses=tuple(
                (tuple(triple), direction)
                for triple, direction in data.get("precedence_uses", ())
            ),
        )


@dataclass
class RoundLog:
    round: int
    picked_near: int
    trained_far: int
    labeled_total: int
    budget_spent: int

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "picked_near": self.picked_near,
            "trained_far": self.trained_far,
            "labeled_total": self.labeled_total,
            "budget_spent": self.budget_spent,
        }


@dataclass
class LearnerState:
    """Labeled/unlabeled partition, budget ledger and per-round log."""

    labeled: dict[str, LabeledText]
    unlabeled: set[str]
    impacts: dict[str, Impact]
    budget_limit: int
    budget_spent: int = 0
    bootstrap_size: int = 0
    trained_total: int = 0
    last_picked: int = 0
    rounds: list[RoundLog] = field(default_factory=list)

    def s1_ids(self) -> list[str]:
        return sorted(self.labeled)

    def s2_ids(self) -> list[str]:
        return sorted(self.unlabeled)

    def check_partition(self) -> None:
        overlap = set(self.labeled) & self.unlabeled
        if overlap:
            raise LearnerError(f"labeled and unlabeled sets overlap: {overlap}")
        if set(self.labeled) | self.unlabeled != set(self.impacts):
            raise LearnerError("labeled + unlabeled must cover all impacts")

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "labeled": [
                self.labeled[t].to_dict() for t in sorted(self.labeled)
            ],
            "unlabeled": sorted(self.unlabeled),
            "budget_limit": self.budget_limit,
            "budget_spent": self.budget_spent,
            "bootstrap_size": self.bootstrap_size,
            "trained_total": self.trained_total,
            "last_picked": self.last_picked,
            "rounds": [r.to_dict() for r in self.rounds],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), ensure_ascii=False,
                       sort_keys=True, indent=1) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_json_dict(
        cls, data: Mapping, impacts: Mapping[str, Impact]
    ) -> "LearnerState":
        state = cls(
            labeled={
                d["text_id"]: LabeledText.from_dict(d) for d in data["labeled"]
            },
            unlabeled=set(data["unlabeled"]),
            impacts=dict(impacts),
            budget_limit=int(data["budget_limit"]),
            budget_spent=int(data["budget_spent"]),
            bootstrap_size=int(data["bootstrap_size"]),
            trained_total=int(data["trained_total"]),
            last_picked=int(data["last_picked"]),
            rounds=[RoundLog(**r) for r in data["rounds"]],
        )
        state.check_partition()
        return state

    @classmethod
    def load(cls, path: str | Path, impacts: Mapping[str, Impact]) -> "LearnerState":
        return cls.from_json_dict(
            json.loads(Path(path).read_text(encoding="utf-8")), impacts
        )


@dataclass
class LearnerReport:
    """Per-round labeling counts in the familiar table layout."""

    rows: list[dict]

    def to_json_dict(self) -> dict:
        return {"rows": self.rows}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["label", "value"])
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()


def build_report(state: LearnerState, grammar: Grammar | None = None) -> LearnerReport:
    rows: list[dict] = [{"label": "Initial", "value": state.bootstrap_size}]
    for log in state.rounds:
        rows.append(
            {"label": f"Picking near {log.round}", "value": log.picked_near}
        )
        rows.append(
            {"label": f"Training far {log.round}", "value": log.trained_far}
        )
    rows.append(
        {"label": "The number of all labeled texts", "value": len(state.labeled)}
    )
    if grammar is not None:
        stats = grammar.stats()
        rows.append(
            {"label": "Production rules", "value": stats["production_rules"]}
        )
        rows.append(
            {"label": "Precedence tuples", "value": stats["precedence_tuples"]}
        )
    return LearnerReport(rows=rows)


def run_annotation_session(
    text: DocText,
    annotator: Annotator,
    grammar: Grammar | None = None,
) -> tuple[RsNode, SessionRules]:
    """Drive one session by repeatedly asking the annotator to decide."""
    state = start_session(text, grammar=grammar, mode="interactive")
    limit = 4 * len(text.edus) + 4
    steps = 0
    while not state.finished:
        if steps > limit:
            raise LearnerError(
                f"annotator failed to finish text {text.id!r} within "
                f"{limit} actions"
            )
        apply_action(state, annotator(state))
        steps += 1
    return finish_session(state)


def _record_annotated(
    state: LearnerState,
    grammar: Grammar,
    text: DocText,
    annotator: Annotator,
) -> None:
    tree, rules = run_annotation_session(text, annotator, grammar=grammar)
    state.labeled[text.id] = LabeledText(
        text_id=text.id,
        source="annotated",
        tree_digest=tree.digest(),
        rule_keys=rules.rule_keys(),
        precedence_uses=rules.precedence_uses(),
    )
    state.unlabeled.discard(text.id)
    state.budget_spent += 1


def bootstrap(
    corpus: Corpus,
    impacts: Sequence[Impact],
    cfg: LearnerConfig,
    annotator: Annotator,
    grammar: Grammar | None = None,
    cores_by_text: Mapping[str, np.ndarray] | None = None,
) -> tuple[Grammar, LearnerState]:
    """Select representatives and annotate them into the initial grammar.

    Core-less texts are never selected as representatives; the budget must
    cover the whole selection before any annotation starts. When core
    vectors are supplied, divergence biases the per-cube sampling; without
    them every cube samples uniformly.
    """
    grammar = grammar if grammar is not None else Grammar()
    eligible = [imp for imp in impacts if imp.has_cores]
    state = LearnerState(
        labeled={},
        unlabeled={imp.text_id for imp in impacts},
        impacts={imp.text_id: imp for imp in impacts},
        budget_limit=cfg.budget,
    )
    if not eligible:
        raise LearnerError("no impacts with cores; nothing to bootstrap from")

    divisions = cfg.divisions or choose_divisions(eligible, cfg.q)
    grid = build_grid(eligible, cores_by_text or {}, divisions)
    divergences = divergences_for(grid)
    rng = np.random.default_rng(cfg.seed)
    picks = select_representatives(
        grid, divergences, cfg.selection_mode, cfg.q, rng
    )
    if cfg.budget < len(picks):
        raise BudgetError(
            f"budget {cfg.budget} cannot cover {len(picks)} bootstrap "
            f"annotations"
        )
    for pick in picks:
        _record_annotated(state, grammar, corpus.text_by_id(pick.text_id),
                          annotator)
    state.bootstrap_size = len(picks)
    state.check_partition()
    return grammar, state


def pick_near(
    state: LearnerState,
    grammar: Grammar,
    corpus: Corpus,
    epsilon: float,
    norm: str = "l1",
) -> list[tuple[str, str]]:
    """Transfer-label every unlabeled impact within epsilon of the labeled
    set; each pair bumps the witness text's rule counts by one.

    Pairs are computed against the labeled set as it stood at entry, the
    witness being the nearest labeled impact (ties to the smaller text id).
    Transferred texts are parsed with the current grammar at no budget cost;
    a failed parse leaves them weak-labeled with nothing to contribute.
    """
    s1 = state.s1_ids()
    s2 = state.s2_ids()
    if not s1 or not s2:
        state.last_picked = 0
        return []
    mat1 = np.stack([state.impacts[t].v for t in s1])
    pairs: list[tuple[str, str]] = []
    for tid in s2:
        point = state.impacts[tid].v
        if norm == "l1":
            dists = np.abs(mat1 - point).sum(axis=1)
        else:
            dists = np.sqrt(((mat1 - point) ** 2).sum(axis=1))
        best = int(np.argmin(dists))
        if float(dists[best]) < epsilon:
            pairs.append((tid, s1[best]))

    # Enhance: witnesses' rules and preference counts each grow by one per
    # pair; rule types never change here.
    for _, witness in pairs:
        fragment = state.labeled[witness]
        for key in fragment.rule_keys:
            grammar.enhance_rule(key)
        for triple, direction in fragment.precedence_uses:
            grammar.enhance_precedence(triple, direction)

    for tid, _ in pairs:
        text = corpus.text_by_id(tid)
        try:
            outcome = parse_outcome(text, grammar, mode="argmax")
            state.labeled[tid] = LabeledText(
                text_id=tid,
                source="transfer",
                tree_digest=outcome.tree.digest(),
                rule_keys=outcome.rule_keys,
                precedence_uses=outcome.precedence_uses,
            )
        except ParseFailure:
            state.labeled[tid] = LabeledText(text_id=tid, source="weak")
        state.unlabeled.discard(tid)

    state.last_picked = len(pairs)
    state.check_partition()
    return pairs


def train_far(
    state: LearnerState,
    grammar: Grammar,
    corpus: Corpus,
    k: int,
    annotator: Annotator,
    norm: str = "l1",
) -> int:
    """Annotate the unlabeled impacts farthest from the labeled set.

    The batch size is min(last round's transfer count, k). Annotation may
    introduce new rule types. Stops early, logging a partial batch, if the
    budget runs out mid-batch.
    """
    k_prime = min(state.last_picked, k)
    if k_prime <= 0:
        return 0
    s1 = state.s1_ids()
    s2 = state.s2_ids()
    if not s1 or not s2:
        return 0
    mat1 = np.stack([state.impacts[t].v for t in s1])
    dist_by_id = {
        tid: nearest_distance(mat1, state.impacts[tid].v, norm=norm)
        for tid in s2
    }
    farthest = sorted(s2, key=lambda tid: (-dist_by_id[tid], tid))[:k_prime]
    trained = 0
    for tid in farthest:
        if state.budget_spent >= state.budget_limit:
            break
        _record_annotated(state, grammar, corpus.text_by_id(tid), annotator)
        trained += 1
    state.trained_total += trained
    state.check_partition()
    return trained


def run_rounds(
    corpus: Corpus,
    state: LearnerState,
    grammar: Grammar,
    cfg: LearnerConfig,
    annotator: Annotator,
) -> None:
    """Alternate pick-near and train-far until the budget is reached, the
    unlabeled set empties, or a round makes no progress."""
    while state.budget_spent < state.budget_limit and state.unlabeled:
        picked = len(pick_near(state, grammar, corpus, cfg.epsilon, cfg.norm))
        trained = train_far(state, grammar, corpus, cfg.k, annotator, cfg.norm)
        state.rounds.append(
            RoundLog(
                round=len(state.rounds) + 1,
                picked_near=picked,
                trained_far=trained,
                labeled_total=len(state.labeled),
                budget_spent=state.budget_spent,
            )
        )
        if picked == 0 and trained == 0:
            # Nothing moved: epsilon reaches no one and there is nothing to
            # train toward, so further rounds would spin forever.
            break


def run(
    corpus: Corpus,
    impacts: Sequence[Impact],
    cfg: LearnerConfig,
    annotator: Annotator,
    cores_by_text: Mapping[str, np.ndarray] | None = None,
) -> tuple[Grammar, LearnerState, LearnerReport]:
    """Bootstrap, then iterate rounds to completion."""
    grammar, state = bootstrap(
        corpus, impacts, cfg, annotator, cores_by_text=cores_by_text
    )
    run_rounds(corpus, state, grammar, cfg, annotator)
    return grammar, state, build_report(state, grammar)


def resume(
    corpus: Corpus,
    cfg: LearnerConfig,
    annotator: Annotator,
    grammar: Grammar,
    state: LearnerState,
) -> tuple[Grammar, LearnerState, LearnerReport]:
    """Continue a checkpointed run; the config may raise the budget."""
    state.budget_limit = cfg.budget
    state.check_partition()
    run_rounds(corpus, state, grammar, cfg, annotator)
    return grammar, state, build_report(state, grammar)
