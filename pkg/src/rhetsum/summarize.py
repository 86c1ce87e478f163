"""EDU extraction from rhetorical structure trees.

Single-text extraction walks the tree balanced and nucleus-first: descend
to the preferred unvisited leaf, output it, then restart at the sibling of
the highest ancestor that still hides unvisited leaves. Multi-text
summarization picks one representative per occupied cube (weighted by cube
occupancy), parses the representatives, and ranks all their EDUs by a
priority that grows with text weight and decays with within-text rank.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, DocText
from .cubes import build_grid, choose_divisions, divergences_for
from .embedding import EmbeddingTable, embed_texts
from .grammar import Grammar
from .parsing import ParseFailure, RsNode, parse


class SummarizationError(Exception):
    def __init__(self, message: str, reports: list[dict] | None = None):
        super().__init__(message)
        self.reports = reports or []


def leaf_priority_order(tree: RsNode) -> list[RsNode]:
    """All leaves in extraction priority order.

    Descent prefers the nucleus child while it still has unvisited leaves
    (two nuclei fall back to document order). After each output the walk
    restarts at the sibling of the highest not-yet-exhausted ancestor of the
    leaf just emitted, or at the root if no such sibling exists.
    """
    if tree.is_leaf:
        return [tree]

    parent: dict[int, RsNode] = {}

    def index(node: RsNode) -> None:
        if node.children is None:
            return
        for child in node.children:
            parent[id(child)] = node
            index(child)

    index(tree)
    visited: set[int] = set()

    def unvisited(node: RsNode) -> int:
        if node.is_leaf:
            return 0 if id(node) in visited else 1
        return unvisited(node.children[0]) + unvisited(node.children[1])

    def descend(node: RsNode) -> RsNode:
        while not node.is_leaf:
            left, right = node.children
            first, second = (
                (right, left) if node.roles == ("S", "N") else (left, right)
            )
            node = first if unvisited(first) else second
        return node

    def sibling(node: RsNode) -> RsNode | None:
        up = parent.get(id(node))
        if up is None:
            return None
        left, right = up.children
        return right if left is node else left

    order: list[RsNode] = []
    total = tree.leaf_count()
    current: RsNode = tree
    while len(order) < total:
        leaf = descend(current)
        order.append(leaf)
        visited.add(id(leaf))
        if len(order) == total:
            break
        restart: RsNode | None = None
        node: RsNode | None = leaf
        while node is not None:
            brother = sibling(node)
            if brother is not None and unvisited(brother):
                restart = brother
            node = parent.get(id(node))
        current = restart if restart is not None else tree
    return order


def traverse(tree: RsNode, n: int) -> list[RsNode]:
    """First n leaves in priority order; fewer if the tree is smaller.

    The result for n is always a prefix of the result for n + 1.
    """
    if n < 1:
        raise SummarizationError("requested EDU count must be at least 1")
    return leaf_priority_order(tree)[:n]


@dataclass(frozen=True)
class SummaryEntry:
    text_id: str
    edu_id: str
    text_weight: int
    edu_rank: int
    priority: float
    tokens: tuple[str, ...] = ()
    ne_tags: tuple[str, ...] = ()
    raw: str = ""

    def to_dict(self) -> dict:
        return {
            "text_id": self.text_id,
            "edu_id": self.edu_id,
            "text_weight": self.text_weight,
            "edu_rank": self.edu_rank,
            "priority": self.priority,
            "tokens": list(self.tokens),
            "ne_tags": list(self.ne_tags),
            "raw": self.raw,
        }


@dataclass
class Summary:
    """Priority-ordered extracted EDUs with provenance."""

    entries: tuple[SummaryEntry, ...]
    requested_n: int
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        keys = [(e.text_id, e.edu_id) for e in self.entries]
        if len(set(keys)) != len(keys):
            raise SummarizationError("summary repeats a (text, EDU) pair")
        if len(self.entries) > self.requested_n:
            raise SummarizationError("summary exceeds the requested length")

    def token_lists(self) -> list[tuple[str, ...]]:
        return [e.tokens for e in self.entries]

    def to_json_dict(self) -> dict:
        return {
            "requested_n": self.requested_n,
            "entries": [e.to_dict() for e in self.entries],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(
            self.to_json_dict(), ensure_ascii=False, sort_keys=True, indent=1
        ) + "\n"

    def to_text(self) -> str:
        return "".join(e.raw + "\n" for e in self.entries)


def priority(text_weight: float, edu_rank: int, decay: float = 0.8) -> float:
    """Monotone up in the text weight, down in the within-text rank."""
    return float(text_weight) * decay ** (edu_rank - 1)


def rank_candidates(
    candidates: Sequence[SummaryEntry], n: int
) -> list[SummaryEntry]:
    """Descending priority; ties prefer the heavier text, then the smaller
    text id, then the earlier rank."""
    ranked = sorted(
        candidates,
        key=lambda e: (-e.priority, -e.text_weight, e.text_id, e.edu_rank),
    )
    return ranked[:n]


def summarize_cluster(
    texts: Sequence[DocText],
    grammar: Grammar,
    table: EmbeddingTable,
    n: int,
    decay: float = 0.8,
    divisions: Sequence[int] | None = None,
    seed: int = 0,
) -> Summary:
    """Summarize one topic cluster.

    Representatives are the single top-divergence pick of each occupied
    cube, weighted by that cube's occupancy; only representatives are
    parsed. Texts that fail to parse are skipped with a warning; if every
    representative fails the whole call fails with the parse reports.
    """
    if not texts:
        raise SummarizationError("cannot summarize an empty cluster")
    if n < 1:
        raise SummarizationError("requested EDU count must be at least 1")

    subcorpus = Corpus.from_texts(texts)
    impacts = embed_texts(subcorpus, table)
    eligible = [imp for imp in impacts if imp.has_cores]
    if not eligible:
        raise SummarizationError("no cluster text has lexical cores")

    if divisions is None:
        divisions = choose_divisions(eligible, 1)
    grid = build_grid(eligible, {}, divisions)
    divergences = divergences_for(grid)
    rng = np.random.default_rng(seed)

    # One representative per occupied cube, weighted by the cube's
    # occupancy. Cubes are visited in sorted coordinate order; within a
    # cube, draws are divergence-proportional without replacement, and a
    # text that fails to parse is skipped (with a warning) in favor of the
    # next draw, so a cube only goes unrepresented when nothing in it
    # parses.
    reps: list[tuple[str, int, "RsNode"]] = []
    notes: list[str] = []
    failures: list[dict] = []
    for coord in sorted(grid.cells):
        members = list(grid.cells[coord])
        occupancy = len(members)
        while members:
            weights = np.array([divergences.get(t, 0.0) for t in members])
            total = float(weights.sum())
            probs = (
                weights / total if total > 0
                else np.full(len(members), 1.0 / len(members))
            )
            chosen = members[int(rng.choice(len(members), p=probs))]
            members.remove(chosen)
            text = subcorpus.text_by_id(chosen)
            try:
                tree = parse(text, grammar, mode="argmax")
            except ParseFailure as exc:
                failures.append(exc.report)
                notes.append(f"representative {chosen} failed to parse")
                continue
            reps.append((chosen, occupancy, tree))
            break

    candidates: list[SummaryEntry] = []
    reps.sort(key=lambda item: (-item[1], item[0]))
    for text_id, weight, tree in reps:
        text = subcorpus.text_by_id(text_id)
        for rank, leaf in enumerate(leaf_priority_order(tree), start=1):
            edu = text.edu_by_id(leaf.edu_id)
            candidates.append(
                SummaryEntry(
                    text_id=text.id,
                    edu_id=edu.id,
                    text_weight=weight,
                    edu_rank=rank,
                    priority=priority(weight, rank, decay),
                    tokens=edu.tokens,
                    ne_tags=edu.ne_tags,
                    raw=edu.raw,
                )
            )
    if not candidates:
        raise SummarizationError(
            "every representative text failed to parse", reports=failures
        )
    if notes:
        warnings.warn("; ".join(notes), stacklevel=2)
    return Summary(
        entries=tuple(rank_candidates(candidates, n)),
        requested_n=n,
        warnings=tuple(notes),
    )
