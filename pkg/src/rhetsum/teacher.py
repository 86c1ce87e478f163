"""Synthetic corpora from a hidden grammar, plus a scripted annotator.

A generated text is a sequence of two-terminal clauses joined by a
right-branching topic spine. Each clause terminal owns small phrase pools
for the time/agent/object slots, so the quadruples respect the slot-sum
constraint structurally (the state-change phrase is the terminal itself)
and texts of the same topic land near each other in impact space. One
clause pair per oracle may reduce to two different parents at a configured
count ratio, which exercises the probabilistic reduce machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json

import numpy as np

from .corpus import Corpus, DocText, Edu, LexicalCore
from .parsing import AnnotationEvent, ParseState, RsNode


class TeacherError(Exception):
    pass


@dataclass(frozen=True)
class ParentOption:
    symbol: str
    rhet_rel: str
    roles: tuple[str, str]
    weight: float = 1.0


@dataclass(frozen=True)
class ClauseTemplate:
    """A two-terminal clause and its possible parents (usually one)."""

    left: str
    right: str
    parents: tuple[ParentOption, ...]
    weight: float = 1.0


@dataclass(frozen=True)
class TopicSpec:
    name: str
    templates: tuple[ClauseTemplate, ...]
    spine_symbol: str
    spine_rel: str = "sequence"


@dataclass(frozen=True)
class OracleGrammar:
    """The hidden generator: topics, clause templates and size limits."""

    topics: tuple[TopicSpec, ...]
    min_clauses: int = 2
    max_clauses: int = 6
    max_internal_nodes: int = 12
    pool_size: int = 5

    def terminals(self) -> tuple[str, ...]:
        out: dict[str, None] = {}
        for topic in self.topics:
            for tpl in topic.templates:
                out.setdefault(tpl.left)
                out.setdefault(tpl.right)
        return tuple(out)


def default_oracle(
    ambiguous_weight: float = 0.25,
    conflict_ratio: tuple[int, int] = (3, 1),
) -> OracleGrammar:
    """Three disjoint topics; the markets topic carries the one ambiguous
    clause pair, its parents weighted by conflict_ratio."""
    markets = TopicSpec(
        name="markets",
        spine_symbol="MARKET_WRAP",
        templates=(
            ClauseTemplate(
                "rally", "retreat",
                (ParentOption("SWING", "contrast", ("N", "N")),),
            ),
            ClauseTemplate(
                "surge", "cool",
                (ParentOption("CORRECTION", "cause", ("N", "S")),),
            ),
            ClauseTemplate(
                "dip", "rebound",
                (
                    ParentOption(
                        "RECOVERY", "elaboration", ("S", "N"),
                        weight=float(conflict_ratio[0]),
                    ),
                    ParentOption(
                        "VOLATILITY", "contrast", ("N", "N"),
                        weight=float(conflict_ratio[1]),
                    ),
                ),
                weight=ambiguous_weight,
            ),
        ),
    )
    trade = TopicSpec(
        name="trade",
        spine_symbol="TRADE_WRAP",
        templates=(
            ClauseTemplate(
                "export_jump", "import_slip",
                (ParentOption("TRADE_GAP", "contrast", ("N", "N")),),
            ),
            ClauseTemplate(
                "tariff_hike", "quota_ease",
                (ParentOption("POLICY_SHIFT", "cause", ("N", "S")),),
            ),
        ),
    )
    banking = TopicSpec(
        name="banking",
        spine_symbol="BANK_WRAP",
        templates=(
            ClauseTemplate(
                "rate_cut", "loan_growth",
                (ParentOption("STIMULUS", "cause", ("N", "S")),),
            ),
            ClauseTemplate(
                "default_spike", "bailout",
                (ParentOption("RESCUE", "solutionhood", ("S", "N")),),
            ),
        ),
    )
    return OracleGrammar(topics=(markets, trade, banking))


@dataclass
class GroundTruth:
    """Per-text trees, replayable event scripts and generator bookkeeping."""

    trees: dict[str, RsNode] = field(default_factory=dict)
    events: dict[str, tuple[AnnotationEvent, ...]] = field(default_factory=dict)
    topics: dict[str, str] = field(default_factory=dict)
    used_phrases: dict[str, frozenset[str]] = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for tid in self.trees:
                record = {
                    "id": tid,
                    "topic": self.topics[tid],
                    "tree": self.trees[tid].to_dict(),
                    "events": [e.to_dict() for e in self.events[tid]],
                }
                fh.write(json.dumps(record, ensure_ascii=False,
                                    separators=(",", ":")))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        truth = cls()
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                tid = record["id"]
                truth.trees[tid] = RsNode.from_dict(record["tree"])
                truth.events[tid] = tuple(
                    AnnotationEvent.from_dict(e) for e in record["events"]
                )
                truth.topics[tid] = record["topic"]
        return truth


def derivation_events(tree: RsNode, author: str = "teacher") -> list[AnnotationEvent]:
    """The left-to-right bottom-up decision sequence that rebuilds `tree`."""
    events: list[AnnotationEvent] = []

    def walk(node: RsNode) -> None:
        if node.is_leaf:
            events.append(AnnotationEvent(kind="shift", author=author))
            return
        walk(node.children[0])
        walk(node.children[1])
        events.append(
            AnnotationEvent(
                kind="reduce",
                parent=node.symbol,
                roles=node.roles,
                rhet_rel=node.rhet_rel,
                author=author,
            )
        )

    walk(tree)
    return events


def _weighted_choice(rng: np.random.Generator, weights: list[float]) -> int:
    probs = np.asarray(weights, dtype=float)
    probs = probs / probs.sum()
    return int(rng.choice(len(probs), p=probs))


def generate(
    oracle: OracleGrammar, n_texts: int, seed: int = 0
) -> tuple[Corpus, GroundTruth]:
    """Deterministically generate texts with trees and event scripts.

    Every EDU gets exactly one lexical core whose state-change phrase names
    its terminal and whose other slots come from the terminal's pools, so
    the EDU-to-terminal mapping the parser uses recovers the generated
    terminal sequence exactly.
    """
    rng = np.random.default_rng(seed)
    pools = {
        term: {
            "t": [f"{term}-t{j}" for j in range(oracle.pool_size)],
            "a": [f"{term}-agent{j}" for j in range(oracle.pool_size)],
            "o": [f"{term}-obj{j}" for j in range(oracle.pool_size)],
        }
        for term in oracle.terminals()
    }
    used: dict[str, set[str]] = {"t": set(), "a": set(), "o": set(), "s": set()}
    texts: list[DocText] = []
    truth = GroundTruth()

    max_clauses = min(oracle.max_clauses, (oracle.max_internal_nodes + 1) // 2)
    for i in range(n_texts):
        topic = oracle.topics[int(rng.integers(len(oracle.topics)))]
        n_clauses = int(rng.integers(oracle.min_clauses, max_clauses + 1))

        clause_nodes: list[RsNode] = []
        leaf_terms: list[str] = []
        for _ in range(n_clauses):
            tpl = topic.templates[
                _weighted_choice(rng, [t.weight for t in topic.templates])
            ]
            parent = tpl.parents[
                _weighted_choice(rng, [p.weight for p in tpl.parents])
                if len(tpl.parents) > 1
                else 0
            ]
            k = len(leaf_terms)
            left = RsNode(symbol=tpl.left, edu_id=f"e{k + 1}")
            right = RsNode(symbol=tpl.right, edu_id=f"e{k + 2}")
            leaf_terms += [tpl.left, tpl.right]
            clause_nodes.append(
                RsNode(
                    symbol=parent.symbol,
                    rhet_rel=parent.rhet_rel,
                    roles=parent.roles,
                    children=(left, right),
                )
            )

        tree = clause_nodes[-1]
        for clause in reversed(clause_nodes[:-1]):
            tree = RsNode(
                symbol=topic.spine_symbol,
                rhet_rel=topic.spine_rel,
                roles=("N", "N"),
                children=(clause, tree),
            )

        edus = []
        cores = []
        for j, term in enumerate(leaf_terms):
            edu_id = f"e{j + 1}"
            t = pools[term]["t"][int(rng.integers(oracle.pool_size))]
            a = pools[term]["a"][int(rng.integers(oracle.pool_size))]
            o = pools[term]["o"][int(rng.integers(oracle.pool_size))]
            used["t"].add(t)
            used["a"].add(a)
            used["o"].add(o)
            used["s"].add(term)
            tokens = (t, a, o, term)
            edus.append(
                Edu(id=edu_id, tokens=tokens, ne_tags=(a,),
                    raw=" ".join(tokens))
            )
            cores.append(LexicalCore(t=t, a=a, o=o, s=term, edu_id=edu_id))

        text_id = f"t{i:04d}"
        texts.append(
            DocText(id=text_id, edus=tuple(edus), cores=tuple(cores),
                    domain=topic.name)
        )
        truth.trees[text_id] = tree
        truth.events[text_id] = tuple(derivation_events(tree))
        truth.topics[text_id] = topic.name

    truth.used_phrases = {slot: frozenset(vals) for slot, vals in used.items()}
    return Corpus.from_texts(texts), truth


class ScriptedTeacher:
    """Answers shift/reduce queries by following the stored event script.

    The teacher only knows its own derivations: a state whose history is not
    a prefix of the script is an error, never a guess.
    """

    def __init__(self, truth: GroundTruth):
        self.truth = truth

    def answer(self, state: ParseState) -> AnnotationEvent:
        script = self.truth.events.get(state.text.id)
        if script is None:
            raise TeacherError(f"no script for text {state.text.id!r}")
        done = len(state.history)
        if done >= len(script):
            raise TeacherError(
                f"text {state.text.id!r}: script exhausted after {done} events"
            )
        for seen, expected in zip(state.history, script):
            if seen.signature()[:4] != expected.signature()[:4]:
                raise TeacherError(
                    f"text {state.text.id!r}: session diverged from the "
                    f"teacher's script"
                )
        nxt = script[done]
        return AnnotationEvent(
            kind=nxt.kind,
            parent=nxt.parent,
            roles=nxt.roles,
            rhet_rel=nxt.rhet_rel,
            ae=nxt.ae,
            author="teacher",
        )

    def __call__(self, state: ParseState) -> AnnotationEvent:
        return self.answer(state)
