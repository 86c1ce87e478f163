from __future__ import annotations

import json

import pytest

from rhetsum import teacher
from rhetsum.corpus import (
    CorpusFormatError,
    CorpusValidationError,
    DocText,
    Edu,
    LexicalCore,
    load_corpus,
    save_corpus,
    vocab_stats,
)

from conftest import make_corpus, make_text

RECORD = {
    "id": "t1",
    "domain": "econ",
    "edus": [
        {"id": "e1", "raw": "growth slowed", "tokens": ["growth", "slowed"],
         "ne_tags": ["IMF"]},
        {"id": "e2", "raw": "rates held", "tokens": ["rates", "held"],
         "ne_tags": []},
    ],
    "cores": [
        {"t": "2019", "a": "IMF", "o": "economy", "s": "down", "edu_id": "e1"}
    ],
}


def write_lines(path, records):
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def test_load_single_text(tmp_path):
    path = tmp_path / "c.jsonl"
    write_lines(path, [RECORD])
    corpus = load_corpus(path)
    assert len(corpus.texts) == 1
    stats = vocab_stats(corpus)
    assert stats.slot_counts == {"t": 1, "a": 1, "o": 1, "s": 1}
    assert corpus.texts[0].edus[0].tokens == ("growth", "slowed")


def test_empty_file_warns(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.warns(UserWarning):
        corpus = load_corpus(path)
    assert corpus.texts == ()
    assert vocab_stats(corpus).avg_edus_per_text == 0.0


def test_core_citing_missing_edu(tmp_path):
    bad = dict(RECORD)
    bad["cores"] = [
        {"t": "2019", "a": "IMF", "o": "economy", "s": "down", "edu_id": "e9"}
    ]
    path = tmp_path / "bad.jsonl"
    write_lines(path, [bad])
    with pytest.raises(CorpusValidationError, match="e9"):
        load_corpus(path)


def test_malformed_line_carries_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        json.dumps(RECORD) + "\n" + "{not json}\n", encoding="utf-8"
    )
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_corpus(path)


def test_missing_field_is_format_error(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_lines(path, [{"id": "t1"}])
    with pytest.raises(CorpusFormatError, match="line 1"):
        load_corpus(path)


def test_duplicate_text_id(tmp_path):
    path = tmp_path / "dup.jsonl"
    write_lines(path, [RECORD, RECORD])
    with pytest.raises(CorpusValidationError, match="t1"):
        load_corpus(path)


def test_duplicate_edu_id_rejected():
    text = DocText(
        id="t1",
        edus=(Edu(id="e1", tokens=("a",)), Edu(id="e1", tokens=("b",))),
        cores=(),
    )
    with pytest.raises(CorpusValidationError, match="duplicate EDU"):
        from rhetsum.corpus import validate_text

        validate_text(text)


def test_empty_core_component_rejected():
    from rhetsum.corpus import validate_text

    text = DocText(
        id="t1",
        edus=(Edu(id="e1", tokens=("a",)),),
        cores=(LexicalCore(t="", a="x", o="y", s="z", edu_id="e1"),),
    )
    with pytest.raises(CorpusValidationError, match="empty 't'"):
        validate_text(text)


def test_vocab_average(tmp_path):
    t1 = make_text("t1", [("x", "IMF", "o1", "s1")] * 3)
    t2 = make_text("t2", [("x", "IMF", "o2", "s2")] * 5)
    corpus = make_corpus(t1, t2)
    stats = vocab_stats(corpus)
    assert stats.avg_edus_per_text == 4.0
    # the shared agent counts once
    assert stats.slot_counts["a"] == 1


def test_vocab_matches_union_of_core_phrases():
    t1 = make_text("t1", [("t1p", "a1", "o1", "s1"), ("t2p", "a1", "o2", "s1")])
    corpus = make_corpus(t1)
    for slot in ("t", "a", "o", "s"):
        from_cores = {c.phrase(slot) for c in corpus.all_cores()}
        assert corpus.vocab[slot] == from_cores


def test_roundtrip_bytes_stable(tmp_path):
    corpus, _ = teacher.generate(teacher.default_oracle(), 8, seed=2)
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    save_corpus(corpus, p1)
    save_corpus(load_corpus(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_generated_counts_match_generator_bookkeeping():
    corpus, truth = teacher.generate(teacher.default_oracle(), 100, seed=9)
    stats = vocab_stats(corpus)
    for slot in ("t", "a", "o", "s"):
        assert stats.slot_counts[slot] == len(truth.used_phrases[slot])


def test_coreless_texts_flagged():
    bare = DocText(id="bare", edus=(Edu(id="e1", tokens=("w",)),), cores=())
    corpus = make_corpus(make_text("t1", [("x", "a", "o", "s")]), bare)
    assert vocab_stats(corpus).coreless_text_ids == ("bare",)
