"""Labelled error-detection datasets built by similarity-guided corruption."""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateGraph, ExhaustedCandidates, MalformedLine, TooFewExamples
from .kg import KnowledgeGraph, Triple


class Label(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"

    def flipped(self) -> Label:
        return Label.CORRECT if self is Label.INCORRECT else Label.INCORRECT


class CorruptionKind(enum.Enum):
    NONE = "none"
    HEAD = "head"
    TAIL = "tail"
    RELATION = "relation"


class Space(enum.Enum):
    ENTITY = "entity"
    RELATION = "relation"


_CORRUPTIONS = (CorruptionKind.HEAD, CorruptionKind.TAIL, CorruptionKind.RELATION)


@dataclass(frozen=True)
class LabeledExample:
    triple: Triple
    label: Label
    corruption: CorruptionKind = CorruptionKind.NONE
    original: Triple | None = None


@dataclass(frozen=True)
class EmbeddingTable:
    entity_vectors: np.ndarray
    relation_vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.entity_vectors.shape[1]

    def vectors(self, space: Space) -> np.ndarray:
        return self.entity_vectors if space is Space.ENTITY else self.relation_vectors


@dataclass(frozen=True)
class DatasetSplit:
    train: list[LabeledExample]
    valid: list[LabeledExample]
    test: list[LabeledExample]

    def parts(self) -> dict[str, list[LabeledExample]]:
        return {"train": self.train, "valid": self.valid, "test": self.test}


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.maximum(norms, 1e-12)


def train_similarity_embeddings(
    g: KnowledgeGraph,
    dim: int = 64,
    epochs: int = 100,
    margin: float = 1.0,
    lr: float = 0.01,
    seed: int = 0,
    batch_size: int = 128,
) -> EmbeddingTable:
    """Translational embeddings trained with a margin ranking loss.

    Each positive ``(h, r, t)`` is paired with one negative made by replacing
    the head or the tail with a different, uniformly drawn entity; the loss
    ``max(0, margin + |h + r - t| - |h' + r - t'|)`` (L2 norms) is minimised
    by plain SGD on its batch sum. Entity rows are renormalised at the start
    of every epoch.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    n_e, n_r = g.num_entities, g.num_relations
    if n_e < 2 or n_r < 1:
        raise DegenerateGraph(f"need >= 2 entities and >= 1 relation, got {n_e} and {n_r}")

    rng = np.random.default_rng(seed)
    bound = 6.0 / math.sqrt(dim)
    ent = rng.uniform(-bound, bound, size=(n_e, dim))
    rel = _normalize_rows(rng.uniform(-bound, bound, size=(n_r, dim)))
    triples = np.asarray(g.triples, dtype=np.int64)
    n = len(triples)

    for _ in range(epochs):
        ent = _normalize_rows(ent)
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = triples[order[start : start + batch_size]]
            h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
            corrupt_head = rng.random(len(batch)) < 0.5
            replaced = np.where(corrupt_head, h, t)
            # uniform over the other n_e - 1 entities
            draw = rng.integers(0, n_e - 1, size=len(batch))
            draw = draw + (draw >= replaced)
            h_neg = np.where(corrupt_head, draw, h)
            t_neg = np.where(corrupt_head, t, draw)

            d_pos = ent[h] + rel[r] - ent[t]
            d_neg = ent[h_neg] + rel[r] - ent[t_neg]
            n_pos = np.linalg.norm(d_pos, axis=1)
            n_neg = np.linalg.norm(d_neg, axis=1)
            active = (margin + n_pos - n_neg) > 0
            if not active.any():
                continue
            u_pos = d_pos / np.maximum(n_pos, 1e-12)[:, None] * active[:, None]
            u_neg = d_neg / np.maximum(n_neg, 1e-12)[:, None] * active[:, None]

            g_ent = np.zeros_like(ent)
            g_rel = np.zeros_like(rel)
            np.add.at(g_ent, h, u_pos)
            np.add.at(g_ent, t, -u_pos)
            np.add.at(g_ent, h_neg, -u_neg)
            np.add.at(g_ent, t_neg, u_neg)
            np.add.at(g_rel, r, u_pos - u_neg)
            ent -= lr * g_ent
            rel -= lr * g_rel

    return EmbeddingTable(ent, rel)


def nearest_neighbors(table: EmbeddingTable, idx: int, k: int, space: Space = Space.ENTITY) -> list[int]:
    """Top-``k`` ids by cosine similarity to ``idx`` (itself excluded), ties by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = table.vectors(space)
    unit = _normalize_rows(m)
    sims = unit @ unit[idx]
    ids = np.arange(len(m))
    order = np.lexsort((ids, -sims))
    return [int(i) for i in order if i != idx][:k]


def _replace(triple: Triple, kind: CorruptionKind, value: int) -> Triple:
    h, r, t = triple
    if kind is CorruptionKind.HEAD:
        return Triple(value, r, t)
    if kind is CorruptionKind.TAIL:
        return Triple(h, r, value)
    return Triple(h, value, t)


def _corrupt_one(
    g: KnowledgeGraph,
    table: EmbeddingTable,
    triple: Triple,
    kind: CorruptionKind,
    top_k: int,
    rng: np.random.Generator,
) -> Triple | None:
    space = Space.RELATION if kind is CorruptionKind.RELATION else Space.ENTITY
    element = {CorruptionKind.HEAD: triple.head, CorruptionKind.TAIL: triple.tail}.get(kind, triple.relation)
    vocab_size = table.vectors(space).shape[0]
    ranked = nearest_neighbors(table, element, vocab_size, space) if vocab_size > 1 else []
    k, tried = top_k, 0
    while tried < len(ranked):
        window = ranked[tried:k]
        for pick in rng.permutation(len(window)):
            candidate = _replace(triple, kind, window[pick])
            if candidate != triple and candidate not in g:
                return candidate
        tried = k
        k *= 2
    return None


def corrupt_dataset(
    g: KnowledgeGraph,
    table: EmbeddingTable,
    rate: float = 0.3,
    top_k: int = 10,
    seed: int = 0,
) -> list[LabeledExample]:
    """Replace exactly ``round(rate * |g|)`` triples with similar-but-absent ones.

    Triples keep their graph order. A corrupted triple swaps its head, tail or
    relation (chosen uniformly) for one of the ``top_k`` cosine neighbours of
    that element; candidates already in ``g`` are rejected and the pool
    doubles until the whole vocabulary has been tried. If the chosen element
    has no valid replacement the other two are tried before giving up.
    """
    if not 0 < rate < 1:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    n = len(g)
    n_corrupt = int(math.floor(rate * n + 0.5))
    chosen = set(np.random.default_rng(seed).choice(n, size=n_corrupt, replace=False).tolist())

    examples: list[LabeledExample] = []
    for i, triple in enumerate(g.triples):
        if i not in chosen:
            examples.append(LabeledExample(triple, Label.CORRECT))
            continue
        rng = np.random.default_rng([seed, i])
        first = _CORRUPTIONS[rng.integers(3)]
        rest = [c for c in _CORRUPTIONS if c is not first]
        order = [first] + [rest[j] for j in rng.permutation(2)]
        for kind in order:
            corrupted = _corrupt_one(g, table, triple, kind, top_k, rng)
            if corrupted is not None:
                examples.append(LabeledExample(corrupted, Label.INCORRECT, kind, triple))
                break
        else:
            raise ExhaustedCandidates(g.render(triple))
    return examples


def split(examples: Sequence[LabeledExample], seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then floor(0.8N) / floor(0.1N) / remainder."""
    n = len(examples)
    if n < 10:
        raise TooFewExamples(f"need at least 10 examples, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [examples[i] for i in order]
    n_train, n_valid = (8 * n) // 10, n // 10
    return DatasetSplit(
        shuffled[:n_train],
        shuffled[n_train : n_train + n_valid],
        shuffled[n_train + n_valid :],
    )


def _triple_json(g: KnowledgeGraph, triple: Triple) -> dict:
    h, r, t = g.surfaces(triple)
    return {"head": h, "relation": r, "tail": t}


def example_to_json(g: KnowledgeGraph, ex: LabeledExample) -> dict:
    return {
        **_triple_json(g, ex.triple),
        "label": ex.label.value,
        "corruption": ex.corruption.value,
        "original": None if ex.original is None else _triple_json(g, ex.original),
    }


def example_from_json(g: KnowledgeGraph, obj: dict) -> LabeledExample:
    original = obj.get("original")
    return LabeledExample(
        g.intern(obj["head"], obj["relation"], obj["tail"]),
        Label(obj["label"]),
        CorruptionKind(obj.get("corruption", "none")),
        None if original is None else g.intern(original["head"], original["relation"], original["tail"]),
    )


def write_examples(path: str | Path, g: KnowledgeGraph, examples: Iterable[LabeledExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_json(g, ex), ensure_ascii=False) + "\n")


def read_examples(path: str | Path, g: KnowledgeGraph) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(example_from_json(g, json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise MalformedLine(line_no, str(exc)) from exc
    return out


def write_split(out_dir: str | Path, g: KnowledgeGraph, parts: DatasetSplit) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, examples in parts.parts().items():
        write_examples(out_dir / f"{name}.jsonl", g, examples)


def read_split(data_dir: str | Path, g: KnowledgeGraph) -> DatasetSplit:
    data_dir = Path(data_dir)
    return DatasetSplit(*(read_examples(data_dir / f"{name}.jsonl", g) for name in ("train", "valid", "test")))
