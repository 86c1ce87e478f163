from __future__ import annotations

import pytest

from rhetsum import embedding, teacher
from rhetsum.corpus import Corpus, DocText, Edu, LexicalCore


@pytest.fixture(scope="session")
def small_truth_corpus():
    """120 deterministic teacher texts shared by slower tests."""
    oracle = teacher.default_oracle(ambiguous_weight=0.25)
    return teacher.generate(oracle, 120, seed=5)


@pytest.fixture(scope="session")
def small_table(small_truth_corpus):
    corpus, _ = small_truth_corpus
    cfg = embedding.TrainConfig(dim=8, epochs=8, seed=0, batch_size=64)
    return embedding.train(corpus, cfg)


def make_text(text_id: str, quads, domain: str = "d") -> DocText:
    """One EDU per (t, a, o, s) quadruple, tokens mirroring the phrases."""
    edus = []
    cores = []
    for i, (t, a, o, s) in enumerate(quads, start=1):
        edu_id = f"e{i}"
        edus.append(
            Edu(id=edu_id, tokens=(t, a, o, s), ne_tags=(a,),
                raw=f"{t} {a} {o} {s}")
        )
        cores.append(LexicalCore(t=t, a=a, o=o, s=s, edu_id=edu_id))
    return DocText(id=text_id, edus=tuple(edus), cores=tuple(cores),
                   domain=domain)


def make_corpus(*texts: DocText) -> Corpus:
    return Corpus.from_texts(texts)
