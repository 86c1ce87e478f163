"""Summary quality metrics.

ROUGE-1/2/L F1 over the corpus tokens as given (no stemming or stop words),
pairwise novelty of the selected EDUs, named-entity coverage, mean word
overlap against the cluster, sentiment agreement through a pluggable
polarity model, and the weighted composite of the four components.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .corpus import DocText
from .summarize import Summary

DEFAULT_WEIGHTS = (20.0, 25.0, 25.0, 30.0)


@dataclass(frozen=True)
class RougeScores:
    r1: float
    r2: float
    rl: float

    def mean(self) -> float:
        return (self.r1 + self.r2 + self.rl) / 3.0


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(
        tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)
    )


def _f1(overlap: int, cand_total: int, ref_total: int) -> float:
    if cand_total == 0 or ref_total == 0:
        return 0.0
    precision = overlap / cand_total
    recall = overlap / ref_total
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _rouge_n(cand: Sequence[str], ref: Sequence[str], n: int) -> float:
    cand_counts = _ngrams(cand, n)
    ref_counts = _ngrams(ref, n)
    overlap = sum(
        min(count, ref_counts[gram]) for gram, count in cand_counts.items()
    )
    return _f1(overlap, sum(cand_counts.values()), sum(ref_counts.values()))


def _lcs_length(xs: Sequence[str], ys: Sequence[str]) -> int:
    if not xs or not ys:
        return 0
    row = [0] * (len(ys) + 1)
    for x in xs:
        prev = 0
        for j, y in enumerate(ys, start=1):
            cur = row[j]
            row[j] = prev + 1 if x == y else max(row[j], row[j - 1])
            prev = cur
    return row[-1]


def rouge(candidate: Sequence[str], reference: Sequence[str]) -> RougeScores:
    """Unigram, bigram and LCS F1 with clipped n-gram counting."""
    if not candidate or not reference:
        warnings.warn("ROUGE over an empty token list is zero", stacklevel=2)
        return RougeScores(0.0, 0.0, 0.0)
    lcs = _lcs_length(candidate, reference)
    return RougeScores(
        r1=_rouge_n(candidate, reference, 1),
        r2=_rouge_n(candidate, reference, 2),
        rl=_f1(lcs, len(candidate), len(reference)),
    )


def novelty(edu_token_lists: Sequence[Sequence[str]]) -> float:
    """One minus the mean pairwise averaged ROUGE over unordered distinct
    EDU pairs, clamped to [0, 1]; a single EDU is maximally novel."""
    edus = list(edu_token_lists)
    if len(edus) < 2:
        warnings.warn(
            "novelty of fewer than two EDUs is 1 by convention", stacklevel=2
        )
        return 1.0
    scores = []
    for i in range(len(edus)):
        for j in range(i + 1, len(edus)):
            scores.append(rouge(edus[i], edus[j]).mean())
    value = 1.0 - sum(scores) / len(scores)
    return min(1.0, max(0.0, value))


def _summary_nes(summary: Summary) -> set[str]:
    return {tag for entry in summary.entries for tag in entry.ne_tags}


def _text_nes(texts: Iterable[DocText]) -> set[str]:
    return {tag for t in texts for e in t.edus for tag in e.ne_tags}


def ne_score(
    summary: Summary,
    texts: Sequence[DocText],
    mode: str = "coverage",
) -> float:
    """Named-entity score.

    Coverage mode (default) is the share of the cluster's unique entities
    the summary mentions, always in [0, 1]. Literal mode is the raw ratio of
    cluster entities to summary entities, which can exceed 1 and is infinite
    for an entity-free summary; it exists for inspection only.
    """
    summary_nes = _summary_nes(summary)
    text_nes = _text_nes(texts)
    if mode == "literal":
        if not summary_nes:
            return float("inf") if text_nes else 0.0
        return len(text_nes) / len(summary_nes)
    if mode != "coverage":
        raise ValueError(f"unknown NE score mode {mode!r}")
    if not text_nes:
        warnings.warn(
            "cluster texts carry no named entities; NE score is vacuously 1",
            stacklevel=2,
        )
        return 1.0
    return len(summary_nes & text_nes) / len(text_nes)


def word_overlap(summary: Summary, texts: Sequence[DocText]) -> float:
    """Mean unigram F1 between the whole summary and each cluster text."""
    if not texts:
        raise ValueError("word overlap needs a non-empty cluster")
    summary_tokens = [tok for entry in summary.entries for tok in entry.tokens]
    scores = []
    for text in texts:
        text_tokens = [tok for edu in text.edus for tok in edu.tokens]
        scores.append(rouge(summary_tokens, text_tokens).r1)
    return sum(scores) / len(scores)


class SentimentModel(Protocol):
    def predict(self, tokens: Sequence[str]) -> int:
        """Polarity in {-1, 0, 1}; total over any token list."""


class LexiconSentiment:
    """Signed lexicon sum with symmetric thresholds.

    Mass beyond +threshold is positive, beyond -threshold negative,
    otherwise neutral. The lexicon maps token to signed weight and is
    supplied by the user (a JSON object file or a plain mapping).
    """

    def __init__(self, lexicon: dict[str, float] | None = None,
                 threshold: float = 2.0):
        self.lexicon = dict(lexicon or {})
        self.threshold = threshold

    @classmethod
    def from_file(cls, path: str | Path, threshold: float = 2.0) -> "LexiconSentiment":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({str(k): float(v) for k, v in data.items()}, threshold)

    def predict(self, tokens: Sequence[str]) -> int:
        mass = sum(self.lexicon.get(tok, 0.0) for tok in tokens)
        if mass > self.threshold:
            return 1
        if mass < -self.threshold:
            return -1
        return 0


def cluster_polarity(polarities: Sequence[int]) -> int:
    """Sign of the mean with a dead band of half a vote."""
    if not polarities:
        return 0
    mean = sum(polarities) / len(polarities)
    if abs(mean) < 1.0 / (2 * len(polarities)):
        return 0
    return 1 if mean > 0 else -1


def sentiment_accuracy(
    summary: Summary,
    texts: Sequence[DocText],
    model: SentimentModel,
) -> float:
    """1.0 when the summary's predicted polarity equals the sign of the
    cluster's mean per-text polarity, else 0.0."""
    per_text = [
        model.predict([tok for edu in t.edus for tok in edu.tokens])
        for t in texts
    ]
    target = cluster_polarity(per_text)
    predicted = model.predict(
        [tok for entry in summary.entries for tok in entry.tokens]
    )
    return 1.0 if predicted == target else 0.0


@dataclass(frozen=True)
class ComponentScores:
    """The four component statistics and their weights."""

    sentiment: float
    novelty: float
    ne: float
    overlap: float
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS

    def to_dict(self) -> dict:
        return {
            "sentiment": self.sentiment,
            "novelty": self.novelty,
            "ne": self.ne,
            "overlap": self.overlap,
            "weights": list(self.weights),
            "composite": composite(self),
        }


def composite(scores: ComponentScores) -> float:
    """Weighted sum; the default weights (20, 25, 25, 30) put it in
    [0, 100]."""
    alpha, beta, gamma, omega = scores.weights
    return (
        alpha * scores.sentiment
        + beta * scores.novelty
        + gamma * scores.ne
        + omega * scores.overlap
    )


def evaluate_summary(
    summary: Summary,
    texts: Sequence[DocText],
    model: SentimentModel | None = None,
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS,
    ne_mode: str = "coverage",
) -> ComponentScores:
    """All four components for one cluster's summary."""
    model = model if model is not None else LexiconSentiment()
    return ComponentScores(
        sentiment=sentiment_accuracy(summary, texts, model),
        novelty=novelty(summary.token_lists()),
        ne=ne_score(summary, texts, mode=ne_mode),
        overlap=word_overlap(summary, texts),
        weights=weights,
    )


def components_csv(
    rows: Sequence[tuple[str | int, ComponentScores]],
) -> str:
    """Aggregate per-cluster component scores into one CSV, ending with a
    mean row across clusters."""
    out = ["cluster,sentiment,novelty,ne,overlap,composite"]
    for cluster_id, scores in rows:
        out.append(
            f"{cluster_id},{scores.sentiment},{scores.novelty},"
            f"{scores.ne},{scores.overlap},{composite(scores)}"
        )
    if rows:
        n = len(rows)
        means = [
            sum(getattr(s, field) for _, s in rows) / n
            for field in ("sentiment", "novelty", "ne", "overlap")
        ]
        mean_composite = sum(composite(s) for _, s in rows) / n
        out.append(
            "mean," + ",".join(str(v) for v in means) + f",{mean_composite}"
        )
    return "\n".join(out) + "\n"
