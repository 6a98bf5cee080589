"""Interned triple store with out/in adjacency indices."""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import NamedTuple

from .errors import EmptyInput, InvalidId, MalformedLine


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Vocab:
    """Bijection between surface strings and dense ids, in first-appearance order."""

    def __init__(self, surfaces: Iterable[str] = ()):
        self._surfaces: list[str] = []
        self._ids: dict[str, int] = {}
        for s in surfaces:
            self.intern(s)

    def intern(self, surface: str) -> int:
        idx = self._ids.get(surface)
        if idx is None:
            idx = len(self._surfaces)
            self._ids[surface] = idx
            self._surfaces.append(surface)
        return idx

    def id(self, surface: str) -> int:
        try:
            return self._ids[surface]
        except KeyError:
            raise InvalidId(f"unknown surface {surface!r}") from None

    def get(self, surface: str) -> int | None:
        return self._ids.get(surface)

    def surface(self, idx: int) -> str:
        if not 0 <= idx < len(self._surfaces):
            raise InvalidId(f"id {idx} out of range")
        return self._surfaces[idx]

    @property
    def surfaces(self) -> list[str]:
        return list(self._surfaces)

    def __len__(self) -> int:
        return len(self._surfaces)

    def __contains__(self, surface: object) -> bool:
        return surface in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self._surfaces == other._surfaces


class KnowledgeGraph:
    """Immutable set of triples with insertion-ordered adjacency.

    Build one with :func:`ingest_triples` (or :func:`load_kg` for a path).
    """

    def __init__(self, triples: list[Triple], entities: Vocab, relations: Vocab):
        self.entities = entities
        self.relations = relations
        self._triples = tuple(triples)
        self._set = frozenset(self._triples)
        self._out: dict[int, list[tuple[int, int]]] = {}
        self._in: dict[int, list[tuple[int, int]]] = {}
        for h, r, t in self._triples:
            self._out.setdefault(h, []).append((r, t))
            self._in.setdefault(t, []).append((h, r))

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self._triples

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: object) -> bool:
        return triple in self._set

    def contains(self, triple: Triple) -> bool:
        return tuple(triple) in self._set

    def out_neighbors(self, entity: int) -> list[tuple[int, int]]:
        """``(relation, tail)`` pairs of triples whose head is ``entity``."""
        return list(self._out.get(entity, ()))

    def in_neighbors(self, entity: int) -> list[tuple[int, int]]:
        """``(head, relation)`` pairs of triples whose tail is ``entity``."""
        return list(self._in.get(entity, ()))

    def check(self, triple: Triple) -> None:
        h, r, t = triple
        n_e, n_r = len(self.entities), len(self.relations)
        if not (0 <= h < n_e and 0 <= t < n_e):
            raise InvalidId(f"entity id out of range in {tuple(triple)}")
        if not 0 <= r < n_r:
            raise InvalidId(f"relation id out of range in {tuple(triple)}")

    def intern(self, head: str, relation: str, tail: str) -> Triple:
        """Map surfaces to a :class:`Triple`; the triple need not be a member."""
        return Triple(self.entities.id(head), self.relations.id(relation), self.entities.id(tail))

    def surfaces(self, triple: Triple) -> tuple[str, str, str]:
        h, r, t = triple
        return self.entities.surface(h), self.relations.surface(r), self.entities.surface(t)

    def render(self, triple: Triple) -> str:
        """``(head, relation, tail)`` using surface strings; the prompt line format."""
        return "({}, {}, {})".format(*self.surfaces(triple))

    def key(self, triple: Triple) -> str:
        return "\t".join(self.surfaces(triple))

    def serialize(self) -> Iterator[str]:
        for triple in self._triples:
            yield self.key(triple)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, KnowledgeGraph)
            and self._triples == other._triples
            and self.entities == other.entities
            and self.relations == other.relations
        )


def ingest_triples(lines: Iterable[str]) -> KnowledgeGraph:
    """Parse tab-separated ``head\\trelation\\ttail`` lines.

    Blank lines are skipped and duplicate triples collapse to their first
    occurrence.
    """
    entities, relations = Vocab(), Vocab()
    seen: set[Triple] = set()
    triples: list[Triple] = []
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedLine(line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        h, r, t = fields
        triple = Triple(entities.intern(h), relations.intern(r), entities.intern(t))
        if triple not in seen:
            seen.add(triple)
            triples.append(triple)
    if not triples:
        raise EmptyInput("no triples in input")
    return KnowledgeGraph(triples, entities, relations)


def load_kg(path: str | Path) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return ingest_triples(fh)
