"""Corpus model: texts, EDUs, lexical cores, and the JSONL interchange format.

A corpus file is UTF-8, one JSON record per line, one text per record:

    {"id": ..., "domain": ..., "edus": [{"id", "raw", "tokens", "ne_tags"}],
     "cores": [{"t", "a", "o", "s", "edu_id"}]}

Segmentation and core extraction happen upstream; this module only stores,
validates and serves the result. See docs/corpus-format.md for the schema.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

SLOTS = ("t", "a", "o", "s")


class CorpusError(Exception):
    """Base class for corpus loading and validation failures."""


class CorpusFormatError(CorpusError):
    """A line of the corpus file could not be decoded or lacks fields."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CorpusValidationError(CorpusError):
    """Structurally well-formed input violating a corpus invariant."""


@dataclass(frozen=True)
class Edu:
    """Elementary discourse unit: the leaf-level span parsing operates on."""

    id: str
    tokens: tuple[str, ...]
    ne_tags: tuple[str, ...] = ()
    raw: str = ""


@dataclass(frozen=True)
class LexicalCore:
    """A (time, agent, object, state-change) quadruple owned by one EDU."""

    t: str
    a: str
    o: str
    s: str
    edu_id: str

    def phrase(self, slot: str) -> str:
        return getattr(self, slot)

    def quad(self) -> tuple[str, str, str, str]:
        return (self.t, self.a, self.o, self.s)


@dataclass(frozen=True)
class DocText:
    """One text: ordered EDUs plus the lexical cores extracted from them."""

    id: str
    edus: tuple[Edu, ...]
    cores: tuple[LexicalCore, ...]
    domain: str = ""

    @property
    def has_cores(self) -> bool:
        return bool(self.cores)

    def edu_by_id(self, edu_id: str) -> Edu:
        for edu in self.edus:
            if edu.id == edu_id:
                return edu
        raise KeyError(edu_id)

    def cores_for(self, edu_id: str) -> tuple[LexicalCore, ...]:
        return tuple(c for c in self.cores if c.edu_id == edu_id)


@dataclass(frozen=True)
class Corpus:
    """An immutable text collection with per-slot phrase vocabularies."""

    texts: tuple[DocText, ...]
    vocab: Mapping[str, frozenset[str]]

    @classmethod
    def from_texts(cls, texts: Iterable[DocText]) -> "Corpus":
        texts = tuple(texts)
        vocab = {
            slot: frozenset(c.phrase(slot) for t in texts for c in t.cores)
            for slot in SLOTS
        }
        return cls(texts=texts, vocab=vocab)

    def text_by_id(self, text_id: str) -> DocText:
        for text in self.texts:
            if text.id == text_id:
                return text
        raise KeyError(text_id)

    def sorted_vocab(self, slot: str) -> tuple[str, ...]:
        return tuple(sorted(self.vocab[slot]))

    def all_cores(self) -> tuple[LexicalCore, ...]:
        return tuple(c for t in self.texts for c in t.cores)

    def coreless_text_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.texts if not t.has_cores)


@dataclass(frozen=True)
class VocabStats:
    """Per-slot unique component counts plus EDU bookkeeping."""

    slot_counts: Mapping[str, int]
    avg_edus_per_text: float
    n_texts: int
    n_edus: int
    n_cores: int
    coreless_text_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "slot_counts": dict(self.slot_counts),
            "avg_edus_per_text": self.avg_edus_per_text,
            "n_texts": self.n_texts,
            "n_edus": self.n_edus,
            "n_cores": self.n_cores,
            "coreless_text_ids": list(self.coreless_text_ids),
        }


def validate_text(text: DocText) -> None:
    """Raise CorpusValidationError on any within-text invariant violation."""
    seen: set[str] = set()
    for edu in text.edus:
        if edu.id in seen:
            raise CorpusValidationError(
                f"text {text.id!r}: duplicate EDU id {edu.id!r}"
            )
        seen.add(edu.id)
        if not edu.tokens:
            raise CorpusValidationError(
                f"text {text.id!r}: EDU {edu.id!r} has no tokens"
            )
    for core in text.cores:
        for slot in SLOTS:
            if not core.phrase(slot):
                raise CorpusValidationError(
                    f"text {text.id!r}: core on EDU {core.edu_id!r} has an "
                    f"empty {slot!r} component"
                )
        if core.edu_id not in seen:
            raise CorpusValidationError(
                f"text {text.id!r}: core references missing EDU "
                f"{core.edu_id!r}"
            )


def _text_from_record(record: dict, line_no: int) -> DocText:
    try:
        edus = tuple(
            Edu(
                id=str(e["id"]),
                tokens=tuple(str(tok) for tok in e["tokens"]),
                ne_tags=tuple(str(tag) for tag in e.get("ne_tags", ())),
                raw=str(e.get("raw", "")),
            )
            for e in record["edus"]
        )
        cores = tuple(
            LexicalCore(
                t=str(c["t"]),
                a=str(c["a"]),
                o=str(c["o"]),
                s=str(c["s"]),
                edu_id=str(c["edu_id"]),
            )
            for c in record.get("cores", ())
        )
        return DocText(
            id=str(record["id"]),
            edus=edus,
            cores=cores,
            domain=str(record.get("domain", "")),
        )
    except (KeyError, TypeError) as exc:
        raise CorpusFormatError(line_no, f"missing or malformed field: {exc}")


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a line-delimited corpus file.

    Errors carry line numbers for malformed records; duplicate text ids and
    cores citing missing EDUs raise validation errors naming the offender.
    """
    path = Path(path)
    texts: list[DocText] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(line_no, f"invalid JSON: {exc.msg}")
            if not isinstance(record, dict):
                raise CorpusFormatError(line_no, "record is not an object")
            text = _text_from_record(record, line_no)
            if text.id in seen_ids:
                raise CorpusValidationError(
                    f"line {line_no}: duplicate text id {text.id!r}"
                )
            seen_ids.add(text.id)
            validate_text(text)
            texts.append(text)
    if not texts:
        warnings.warn(f"corpus file {path} contains no texts", stacklevel=2)
    return Corpus.from_texts(texts)


def text_to_record(text: DocText) -> dict:
    return {
        "id": text.id,
        "domain": text.domain,
        "edus": [
            {
                "id": e.id,
                "raw": e.raw,
                "tokens": list(e.tokens),
                "ne_tags": list(e.ne_tags),
            }
            for e in text.edus
        ],
        "cores": [
            {"t": c.t, "a": c.a, "o": c.o, "s": c.s, "edu_id": c.edu_id}
            for c in text.cores
        ],
    }


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus back out, one compact JSON record per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for text in corpus.texts:
            handle.write(
                json.dumps(
                    text_to_record(text), ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            handle.write("\n")


def vocab_stats(corpus: Corpus) -> VocabStats:
    """Exact per-slot unique counts and the mean EDU count per text.

    All four slots are reported, time included, even though time
    vocabularies tend to dwarf the other components.
    """
    n_texts = len(corpus.texts)
    n_edus = sum(len(t.edus) for t in corpus.texts)
    return VocabStats(
        slot_counts={slot: len(corpus.vocab[slot]) for slot in SLOTS},
        avg_edus_per_text=(n_edus / n_texts) if n_texts else 0.0,
        n_texts=n_texts,
        n_edus=n_edus,
        n_cores=sum(len(t.cores) for t in corpus.texts),
        coreless_text_ids=corpus.coreless_text_ids(),
    )
