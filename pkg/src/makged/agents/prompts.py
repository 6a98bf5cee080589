"""Prompt templates. Output is a pure function of the inputs."""

from __future__ import annotations

from collections.abc import Sequence

from ..errors import EmptyTranscript, IncompleteTranscript, RoleMismatch
from ..kg import KnowledgeGraph, Triple
from ..subgraphs import DirectionalSubgraph, render_subgraph
from .roles import DIRECTIONAL_ROLES, AgentRole, AgentTurn

FORMAT_INSTRUCTION = "Reply in exactly this format:\nVERDICT: correct|incorrect\nREASON: <text>"
SUMMARY_FORMAT_INSTRUCTION = "Reply in exactly this format:\nREASON: <text>\nVERDICT: correct|incorrect"

_PERSPECTIVE = {
    AgentRole.HEAD_FORWARD: "the outgoing edges of the head entity {h} (triples with {h} as head), not counting the target triple",
    AgentRole.HEAD_BACKWARD: "the incoming edges of the head entity {h} (triples with {h} as tail)",
    AgentRole.TAIL_FORWARD: "the outgoing edges of the tail entity {t} (triples with {t} as head)",
    AgentRole.TAIL_BACKWARD: "the incoming edges of the tail entity {t} (triples with {t} as tail), not counting the target triple",
}


def _one_line(text: str) -> str:
    return " ".join(text.split())


def _check_role(role: AgentRole, sg: DirectionalSubgraph) -> None:
    if not role.is_directional:
        raise RoleMismatch(f"{role.value} cannot judge from a subgraph")
    if role.kind is not sg.kind:
        raise RoleMismatch(f"{role.value} was given a {sg.kind.value} subgraph")


def _header(g: KnowledgeGraph, target: Triple, sg: DirectionalSubgraph, role: AgentRole) -> list[str]:
    h, _, t = g.surfaces(target)
    lines = [
        f"You are the {role.value} on a four-agent panel checking facts in a knowledge graph.",
        "PERSPECTIVE: you see " + _PERSPECTIVE[role].format(h=h, t=t) + ".",
        f"TARGET TRIPLE: {g.render(target)}",
    ]
    body = render_subgraph(g, sg)
    if body:
        lines += ["SUBGRAPH:", body]
    else:
        lines.append("SUBGRAPH: (none)")
    return lines


def build_analysis_prompt(g: KnowledgeGraph, target: Triple, sg: DirectionalSubgraph, role: AgentRole) -> str:
    _check_role(role, sg)
    lines = _header(g, target, sg, role)
    lines += [
        "TASK: using the subgraph as evidence, decide on your own whether the target triple is correct. "
        "Call it incorrect when the relation does not actually hold between its head and tail.",
        FORMAT_INSTRUCTION,
    ]
    return "\n".join(lines)


def latest_turns(transcript: Sequence[AgentTurn]) -> dict[AgentRole, AgentTurn]:
    latest: dict[AgentRole, AgentTurn] = {}
    for turn in transcript:
        if turn.role.is_directional and (turn.role not in latest or turn.round >= latest[turn.role].round):
            latest[turn.role] = turn
    return latest


def build_discussion_prompt(
    g: KnowledgeGraph,
    target: Triple,
    sg: DirectionalSubgraph,
    role: AgentRole,
    transcript: Sequence[AgentTurn],
) -> str:
    _check_role(role, sg)
    if not transcript:
        raise EmptyTranscript("discussion needs at least the analysis round")
    latest = latest_turns(transcript)
    lines = _header(g, target, sg, role)
    own = latest.get(role)
    lines.append("YOUR PREVIOUS POSITION:")
    if own is None:
        lines.append("(none)")
    else:
        lines += [f"VERDICT: {own.verdict.value}", f"REASON: {_one_line(own.rationale)}"]
    lines.append("OTHER AGENTS:")
    for peer in DIRECTIONAL_ROLES:
        if peer is role or peer not in latest:
            continue
        turn = latest[peer]
        lines.append(f"PEER {peer.value}: VERDICT: {turn.verdict.value}; REASON: {_one_line(turn.rationale)}")
    lines += [
        "TASK: weigh the other agents' arguments against your own evidence and give your updated judgment.",
        FORMAT_INSTRUCTION,
    ]
    return "\n".join(lines)


def build_summarizer_prompt(
    g: KnowledgeGraph, target: Triple, transcript: Sequence[AgentTurn], rounds: int = 3
) -> str:
    """Structured digest of rounds ``0..rounds``; every directional agent must appear in each."""
    by_round: dict[int, dict[AgentRole, AgentTurn]] = {}
    for turn in transcript:
        if turn.role.is_directional:
            by_round.setdefault(turn.round, {})[turn.role] = turn
    for rnd in range(rounds + 1):
        missing = [r.value for r in DIRECTIONAL_ROLES if r not in by_round.get(rnd, {})]
        if missing:
            raise IncompleteTranscript(f"round {rnd} lacks turns from {', '.join(missing)}")

    lines = [
        "You are the Summarizer. Four agents, each looking at a different directional subgraph, "
        f"debated the target triple for {rounds} round(s) and ended evenly split.",
        f"TARGET TRIPLE: {g.render(target)}",
    ]
    for rnd in range(rounds + 1):
        phase = "analysis" if rnd == 0 else "discussion"
        lines.append(f"=== ROUND {rnd} ({phase}) ===")
        for role in DIRECTIONAL_ROLES:
            turn = by_round[rnd][role]
            lines.append(f"[{role.value}] VERDICT: {turn.verdict.value}")
            lines.append(f"    {_one_line(turn.rationale)}")
    lines += [
        "TASK: weigh the arguments and evidence from all rounds and give the final judgment on the target triple.",
        SUMMARY_FORMAT_INSTRUCTION,
    ]
    return "\n".join(lines)
