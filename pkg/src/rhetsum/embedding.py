"""Lexical-core embeddings and per-text impact vectors.

Each phrase of each slot (t, a, o, s) gets a w-dimensional vector. A core
embeds as the 4w concatenation of its slot vectors, and the constraint
"t + a + o = s" drives a margin ranking loss: well-formed quadruples should
have a smaller slot-sum residual than quadruples corrupted in one slot.
A text's impact is the sum of its core vectors (zero if it has none).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import SLOTS, Corpus, LexicalCore

_MAGIC = b"COREEMB1"


class EmbeddingError(Exception):
    pass


class PhraseLookupError(EmbeddingError):
    """A core names a phrase the table has no vector for."""


class CorruptionError(EmbeddingError):
    """No slot has an alternative phrase to corrupt with."""


@dataclass
class TrainConfig:
    """Knobs for margin training; defaults follow common practice."""

    dim: int = 150
    margin: float = 2.0
    norm: str = "l1"
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 64
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.norm not in ("l1", "l2"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.dim < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("dim/batch_size must be >= 1, epochs >= 0")


@dataclass
class EmbeddingTable:
    """slot -> (phrase -> w-dim vector), with a deterministic phrase order."""

    dim: int
    phrases: dict[str, tuple[str, ...]]
    vectors: dict[str, np.ndarray]
    training_losses: tuple[float, ...] = ()
    index: dict[str, dict[str, int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.index = {
            slot: {p: i for i, p in enumerate(self.phrases[slot])}
            for slot in SLOTS
        }
        for slot in SLOTS:
            mat = self.vectors[slot]
            if mat.shape != (len(self.phrases[slot]), self.dim):
                raise EmbeddingError(
                    f"slot {slot!r}: vector matrix shape {mat.shape} does not "
                    f"match {len(self.phrases[slot])} phrases x dim {self.dim}"
                )

    def vector(self, slot: str, phrase: str) -> np.ndarray:
        try:
            return self.vectors[slot][self.index[slot][phrase]]
        except KeyError:
            raise PhraseLookupError(f"no {slot!r} embedding for {phrase!r}")

    def core_vector(self, core: LexicalCore) -> np.ndarray:
        return np.concatenate(
            [self.vector(slot, core.phrase(slot)) for slot in SLOTS]
        )

    def residual(self, quad: Sequence[str]) -> np.ndarray:
        """t + a + o - s for a (t, a, o, s) phrase quadruple."""
        t, a, o, s = quad
        return (
            self.vector("t", t) + self.vector("a", a)
            + self.vector("o", o) - self.vector("s", s)
        )

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(
            dim=self.dim,
            phrases={s: tuple(p) for s, p in self.phrases.items()},
            vectors={s: v.copy() for s, v in self.vectors.items()},
            training_losses=self.training_losses,
        )

    def save(self, path: str | Path) -> None:
        """Binary file: magic, length-prefixed JSON header, then the four
        slot matrices as little-endian float64 in header phrase order."""
        header = json.dumps(
            {
                "format": "core-embedding",
                "version": 1,
                "dim": self.dim,
                "slots": {s: list(self.phrases[s]) for s in SLOTS},
            },
            ensure_ascii=False,
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        with Path(path).open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack(">I", len(header)))
            fh.write(header)
            for slot in SLOTS:
                fh.write(
                    np.ascontiguousarray(
                        self.vectors[slot], dtype="<f8"
                    ).tobytes()
                )

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        with Path(path).open("rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise EmbeddingError(f"{path}: not an embedding table file")
            (hlen,) = struct.unpack(">I", fh.read(4))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            dim = int(header["dim"])
            phrases = {s: tuple(header["slots"][s]) for s in SLOTS}
            vectors = {}
            for slot in SLOTS:
                n = len(phrases[slot])
                buf = fh.read(n * dim * 8)
                if len(buf) != n * dim * 8:
                    raise EmbeddingError(f"{path}: truncated payload")
                vectors[slot] = np.frombuffer(buf, dtype="<f8").reshape(
                    n, dim
                ).copy()
        return cls(dim=dim, phrases=phrases, vectors=vectors)


@dataclass(frozen=True)
class CoreVector:
    """One embedded lexical core: the 4w concatenation of its slot vectors."""

    core: LexicalCore
    v: np.ndarray


@dataclass(frozen=True)
class Impact:
    """A text's position in embedding space: the sum of its core vectors."""

    text_id: str
    v: np.ndarray
    n_cores: int

    @property
    def has_cores(self) -> bool:
        return self.n_cores > 0


def distance(residual: np.ndarray, norm: str = "l1") -> float:
    if norm == "l1":
        return float(np.abs(residual).sum())
    return float(np.sqrt((residual * residual).sum()))


def _distance_grad(residual: np.ndarray, norm: str) -> np.ndarray:
    # Subgradient at kinks is taken as zero: np.sign(0) == 0, and a zero
    # l2 residual gets a zero direction.
    if norm == "l1":
        return np.sign(residual)
    nrm = float(np.sqrt((residual * residual).sum()))
    if nrm == 0.0:
        return np.zeros_like(residual)
    return residual / nrm


def pair_loss(
    core: LexicalCore | Sequence[str],
    corrupted: LexicalCore | Sequence[str],
    table: EmbeddingTable,
    cfg: TrainConfig,
) -> float:
    quad = core.quad() if isinstance(core, LexicalCore) else tuple(core)
    bad = (
        corrupted.quad()
        if isinstance(corrupted, LexicalCore)
        else tuple(corrupted)
    )
    d_pos = distance(table.residual(quad), cfg.norm)
    d_neg = distance(table.residual(bad), cfg.norm)
    return max(0.0, cfg.margin + d_pos - d_neg)


def loss(
    batch: Iterable[tuple[LexicalCore, LexicalCore]],
    table: EmbeddingTable,
    cfg: TrainConfig,
) -> float:
    """Hinge sum over (observed, corrupted) pairs; never negative."""
    return sum(pair_loss(pos, neg, table, cfg) for pos, neg in batch)


def loss_gradients(
    batch: Iterable[tuple[LexicalCore, LexicalCore]],
    table: EmbeddingTable,
    cfg: TrainConfig,
) -> dict[str, np.ndarray]:
    """Analytic subgradient of `loss` w.r.t. every table entry (dense)."""
    grads = {s: np.zeros_like(table.vectors[s]) for s in SLOTS}
    for pos, neg in batch:
        pq = pos.quad() if isinstance(pos, LexicalCore) else tuple(pos)
        nq = neg.quad() if isinstance(neg, LexicalCore) else tuple(neg)
        r_pos = table.residual(pq)
        r_neg = table.residual(nq)
        if cfg.margin + distance(r_pos, cfg.norm) - distance(
            r_neg, cfg.norm
        ) <= 0:
            continue
        g_pos = _distance_grad(r_pos, cfg.norm)
        g_neg = _distance_grad(r_neg, cfg.norm)
        for si, slot in enumerate(SLOTS):
            sign = -1.0 if slot == "s" else 1.0
            grads[slot][table.index[slot][pq[si]]] += sign * g_pos
            grads[slot][table.index[slot][nq[si]]] -= sign * g_neg
    return grads


def corrupt(
    core: LexicalCore,
    vocab: Mapping[str, Sequence[str]],
    rng: np.random.Generator,
) -> LexicalCore:
    """Replace exactly one slot's phrase, both choices uniform.

    Slots whose vocabulary holds only the original phrase are skipped; if no
    slot is corruptible the core cannot be corrupted at all.
    """
    ordered = {slot: sorted(vocab[slot]) for slot in SLOTS}
    corruptible = [s for s in SLOTS if len(ordered[s]) >= 2]
    if not corruptible:
        raise CorruptionError(
            "every slot vocabulary is a singleton; corruption impossible"
        )
    slot = corruptible[int(rng.integers(len(corruptible)))]
    candidates = [p for p in ordered[slot] if p != core.phrase(slot)]
    replacement = candidates[int(rng.integers(len(candidates)))]
    return replace(core, **{slot: replacement})


def _quad_indices(
    corpus: Corpus, phrases: dict[str, tuple[str, ...]]
) -> dict[str, np.ndarray]:
    index = {s: {p: i for i, p in enumerate(phrases[s])} for s in SLOTS}
    cols: dict[str, list[int]] = {s: [] for s in SLOTS}
    for text in corpus.texts:
        for core in text.cores:
            for slot in SLOTS:
                cols[slot].append(index[slot][core.phrase(slot)])
    return {s: np.asarray(cols[s], dtype=np.int64) for s in SLOTS}


def train(corpus: Corpus, cfg: TrainConfig) -> EmbeddingTable:
    """Minimize the margin loss by adaptive-moment stochastic steps.

    One corrupted sample per observed quadruple per epoch, uniform over the
    corruptible slots. Vectors are initialized uniform in [-6/sqrt(w),
    +6/sqrt(w)] and L2-normalized per row at the start of every epoch.
    Deterministic for a fixed seed; zero epochs returns the raw init.
    """
    phrases = {slot: corpus.sorted_vocab(slot) for slot in SLOTS}
    n_quads = sum(len(t.cores) for t in corpus.texts)
    if n_quads == 0:
        raise EmbeddingError("corpus has no lexical cores to train on")

    rng = np.random.default_rng(cfg.seed)
    bound = 6.0 / np.sqrt(cfg.dim)
    mats = {
        slot: rng.uniform(-bound, bound, size=(len(phrases[slot]), cfg.dim))
        for slot in SLOTS
    }
    idx = _quad_indices(corpus, phrases)
    sizes = {slot: len(phrases[slot]) for slot in SLOTS}
    corruptible = [si for si, slot in enumerate(SLOTS) if sizes[slot] >= 2]
    if cfg.epochs > 0 and not corruptible:
        raise CorruptionError(
            "every slot vocabulary is a singleton; corruption impossible"
        )

    adam_m = {s: np.zeros_like(mats[s]) for s in SLOTS}
    adam_v = {s: np.zeros_like(mats[s]) for s in SLOTS}
    step = 0
    losses: list[float] = []

    for _ in range(cfg.epochs):
        for slot in SLOTS:
            norms = np.linalg.norm(mats[slot], axis=1, keepdims=True)
            mats[slot] /= np.maximum(norms, 1e-12)
        order = rng.permutation(n_quads)
        epoch_loss = 0.0
        for start in range(0, n_quads, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            b = len(batch)
            pos = {s: idx[s][batch] for s in SLOTS}
            # Same distribution as corrupt(): uniform corruptible slot, then
            # a uniform replacement excluding the original phrase.
            slot_pick = rng.integers(len(corruptible), size=b)
            neg = {s: pos[s].copy() for s in SLOTS}
            for ci, si in enumerate(corruptible):
                slot = SLOTS[si]
                mask = slot_pick == ci
                if not mask.any():
                    continue
                draw = rng.integers(sizes[slot] - 1, size=int(mask.sum()))
                orig = neg[slot][mask]
                neg[slot][mask] = draw + (draw >= orig)

            r_pos = (
                mats["t"][pos["t"]] + mats["a"][pos["a"]]
                + mats["o"][pos["o"]] - mats["s"][pos["s"]]
            )
            r_neg = (
                mats["t"][neg["t"]] + mats["a"][neg["a"]]
                + mats["o"][neg["o"]] - mats["s"][neg["s"]]
            )
            if cfg.norm == "l1":
                d_pos = np.abs(r_pos).sum(axis=1)
                d_neg = np.abs(r_neg).sum(axis=1)
                g_pos = np.sign(r_pos)
                g_neg = np.sign(r_neg)
            else:
                d_pos = np.linalg.norm(r_pos, axis=1)
                d_neg = np.linalg.norm(r_neg, axis=1)
                g_pos = r_pos / np.maximum(d_pos, 1e-300)[:, None]
                g_neg = r_neg / np.maximum(d_neg, 1e-300)[:, None]

            hinge = cfg.margin + d_pos - d_neg
            active = hinge > 0
            epoch_loss += float(hinge[active].sum())
            g_pos = g_pos * active[:, None]
            g_neg = g_neg * active[:, None]

            grads = {s: np.zeros_like(mats[s]) for s in SLOTS}
            for slot in SLOTS:
                sign = -1.0 if slot == "s" else 1.0
                np.add.at(grads[slot], pos[slot], sign * g_pos)
                np.add.at(grads[slot], neg[slot], -sign * g_neg)

            step += 1
            b1, b2 = cfg.adam_beta1, cfg.adam_beta2
            for slot in SLOTS:
                g = grads[slot]
                adam_m[slot] = b1 * adam_m[slot] + (1 - b1) * g
                adam_v[slot] = b2 * adam_v[slot] + (1 - b2) * g * g
                m_hat = adam_m[slot] / (1 - b1 ** step)
                v_hat = adam_v[slot] / (1 - b2 ** step)
                mats[slot] -= cfg.learning_rate * m_hat / (
                    np.sqrt(v_hat) + cfg.adam_eps
                )
        losses.append(epoch_loss / n_quads)

    return EmbeddingTable(
        dim=cfg.dim,
        phrases=phrases,
        vectors=mats,
        training_losses=tuple(losses),
    )


def embed_texts(corpus: Corpus, table: EmbeddingTable) -> list[Impact]:
    """One impact per text: the sum of its core vectors, zero if core-less."""
    impacts = []
    for text in corpus.texts:
        if text.cores:
            v = np.sum([table.core_vector(c) for c in text.cores], axis=0)
        else:
            v = np.zeros(4 * table.dim)
        impacts.append(Impact(text_id=text.id, v=v, n_cores=len(text.cores)))
    return impacts


def embed_cores(corpus: Corpus, table: EmbeddingTable) -> list[CoreVector]:
    """Every core of the corpus as an embedded record, in corpus order."""
    return [
        CoreVector(core=c, v=table.core_vector(c))
        for text in corpus.texts
        for c in text.cores
    ]


def core_vectors_by_text(
    corpus: Corpus, table: EmbeddingTable
) -> dict[str, np.ndarray]:
    """Per text, the stacked 4w vectors of its cores (rows in core order)."""
    out: dict[str, np.ndarray] = {}
    for text in corpus.texts:
        if text.cores:
            out[text.id] = np.stack(
                [table.core_vector(c) for c in text.cores]
            )
        else:
            out[text.id] = np.zeros((0, 4 * table.dim))
    return out
