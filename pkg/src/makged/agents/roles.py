from __future__ import annotations

import enum
from dataclasses import dataclass

from ..subgraphs import SubgraphKind


class AgentRole(enum.Enum):
    HEAD_FORWARD = "Head_Forward_Agent"
    HEAD_BACKWARD = "Head_Backward_Agent"
    TAIL_FORWARD = "Tail_Forward_Agent"
    TAIL_BACKWARD = "Tail_Backward_Agent"
    SUMMARIZER = "Summarizer"

    @property
    def is_directional(self) -> bool:
        return self is not AgentRole.SUMMARIZER

    @property
    def kind(self) -> SubgraphKind:
        if not self.is_directional:
            raise ValueError("the summarizer has no subgraph")
        return SubgraphKind[self.name]

    @classmethod
    def for_kind(cls, kind: SubgraphKind) -> AgentRole:
        return cls[kind.name]

    @classmethod
    def parse(cls, text: str) -> AgentRole:
        for role in cls:
            if text in (role.value, role.name, role.name.lower()):
                return role
        raise ValueError(f"unknown agent role {text!r}")


DIRECTIONAL_ROLES: tuple[AgentRole, ...] = tuple(r for r in AgentRole if r.is_directional)


class Verdict(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class AgentTurn:
    role: AgentRole
    round: int
    verdict: Verdict
    rationale: str
    raw_reply: str = ""

    def __post_init__(self):
        if not 0 <= self.round <= 3:
            raise ValueError(f"round must be in 0..3, got {self.round}")
