"""The four one-hop directional neighbourhoods around a target triple."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .kg import KnowledgeGraph, Triple

DEFAULT_CAP = 25


class SubgraphKind(enum.Enum):
    HEAD_FORWARD = "head_forward"
    HEAD_BACKWARD = "head_backward"
    TAIL_FORWARD = "tail_forward"
    TAIL_BACKWARD = "tail_backward"

    @property
    def is_forward(self) -> bool:
        return self in (SubgraphKind.HEAD_FORWARD, SubgraphKind.TAIL_FORWARD)

    @property
    def on_head(self) -> bool:
        return self in (SubgraphKind.HEAD_FORWARD, SubgraphKind.HEAD_BACKWARD)


KINDS: tuple[SubgraphKind, ...] = tuple(SubgraphKind)


@dataclass(frozen=True)
class DirectionalSubgraph:
    kind: SubgraphKind
    center: int
    target: Triple
    triples: tuple[Triple, ...]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.triples)

    def nodes(self) -> list[int]:
        """Center first, then other entities in order of appearance; empty if no triples."""
        if not self.triples:
            return []
        seen = {self.center: None}
        for h, _, t in self.triples:
            seen.setdefault(h, None)
            seen.setdefault(t, None)
        return list(seen)


def _candidates(g: KnowledgeGraph, target: Triple, kind: SubgraphKind) -> list[Triple]:
    h, r, t = target
    if kind is SubgraphKind.HEAD_FORWARD:
        return [Triple(h, r2, t2) for r2, t2 in g.out_neighbors(h) if (r2, t2) != (r, t)]
    if kind is SubgraphKind.HEAD_BACKWARD:
        return [Triple(h2, r2, h) for h2, r2 in g.in_neighbors(h)]
    if kind is SubgraphKind.TAIL_FORWARD:
        return [Triple(t, r2, t2) for r2, t2 in g.out_neighbors(t)]
    return [Triple(h2, r2, t) for h2, r2 in g.in_neighbors(t) if (h2, r2) != (h, r)]


def extract(
    g: KnowledgeGraph,
    target: Triple,
    kind: SubgraphKind,
    cap: int | None = DEFAULT_CAP,
    seed: int = 0,
) -> DirectionalSubgraph:
    """Return the ``kind`` neighbourhood of ``target``.

    Head/Tail-Forward use the out-edges of the head/tail entity, the Backward
    kinds use in-edges. Only HEAD_FORWARD and TAIL_BACKWARD drop the target
    itself. When more than ``cap`` triples qualify, a uniform sample of
    ``cap`` is drawn with an RNG keyed on ``(seed, target, kind)``; the sample
    keeps adjacency order. ``cap=None`` disables truncation.
    """
    g.check(target)
    target = Triple(*target)
    if cap is not None and cap < 1:
        raise ValueError("cap must be positive")
    triples = _candidates(g, target, kind)
    truncated = False
    if cap is not None and len(triples) > cap:
        rng = np.random.default_rng([seed, *target, KINDS.index(kind)])
        keep = np.sort(rng.choice(len(triples), size=cap, replace=False))
        triples = [triples[i] for i in keep]
        truncated = True
    center = target.head if kind.on_head else target.tail
    return DirectionalSubgraph(kind, center, target, tuple(triples), truncated)


def extract_all_four(
    g: KnowledgeGraph, target: Triple, cap: int | None = DEFAULT_CAP, seed: int = 0
) -> dict[SubgraphKind, DirectionalSubgraph]:
    return {kind: extract(g, target, kind, cap, seed) for kind in KINDS}


def render_subgraph(g: KnowledgeGraph, sg: DirectionalSubgraph) -> str:
    """One ``(head, relation, tail)`` line per member triple, in list order."""
    return "\n".join(g.render(t) for t in sg.triples)
