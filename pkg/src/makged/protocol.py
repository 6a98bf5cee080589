"""Analysis round, up to three discussion rounds, majority rule, summarizer tie-break."""

from __future__ import annotations

import enum
import json
from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .agents import (
    DIRECTIONAL_ROLES,
    AgentBackend,
    AgentRole,
    AgentTurn,
    QueryContext,
    Verdict,
    build_analysis_prompt,
    build_discussion_prompt,
    build_summarizer_prompt,
    latest_turns,
    query_and_parse,
)
from .dataset import Label
from .errors import ConfigError, MakgedError, SummarizerFailure, TransportError
from .kg import KnowledgeGraph, Triple
from .subgraphs import DEFAULT_CAP, extract_all_four

MAX_ROUNDS = 3


class Method(enum.Enum):
    CONSENSUS = "consensus"
    MAJORITY = "majority"
    SUMMARIZER = "summarizer"


@dataclass(frozen=True)
class ConsensusState:
    method: Method | None  # None means tie
    label: Label | None = None

    @property
    def is_consensus(self) -> bool:
        return self.method is Method.CONSENSUS

    @property
    def is_tie(self) -> bool:
        return self.method is None


TIE = ConsensusState(None)


def _label(v: Verdict) -> Label:
    return Label.CORRECT if v is Verdict.CORRECT else Label.INCORRECT


def tally(verdicts: Sequence[Verdict]) -> ConsensusState:
    """Classify the latest verdicts of the four agents. Abstentions are not counted."""
    if len(verdicts) != len(DIRECTIONAL_ROLES):
        raise ValueError(f"expected {len(DIRECTIONAL_ROLES)} verdicts, got {len(verdicts)}")
    counts = Counter(verdicts)
    n_c, n_i = counts[Verdict.CORRECT], counts[Verdict.INCORRECT]
    if counts[Verdict.ABSTAIN] == 0 and (n_c == 0 or n_i == 0):
        return ConsensusState(Method.CONSENSUS, Label.CORRECT if n_c else Label.INCORRECT)
    if n_c != n_i:
        return ConsensusState(Method.MAJORITY, Label.CORRECT if n_c > n_i else Label.INCORRECT)
    return TIE


@dataclass
class DiscussionTranscript:
    turns: list[AgentTurn] = field(default_factory=list)

    @property
    def rounds_used(self) -> int:
        return max((t.round for t in self.turns), default=0)

    def round(self, n: int) -> list[AgentTurn]:
        return [t for t in self.turns if t.round == n]

    def latest_verdicts(self) -> list[Verdict]:
        latest = latest_turns(self.turns)
        return [latest[r].verdict for r in DIRECTIONAL_ROLES]


@dataclass
class Decision:
    triple: Triple
    label: Label
    method: Method
    rounds_used: int
    transcript: DiscussionTranscript
    summary: AgentTurn | None = None


@dataclass(frozen=True)
class ProtocolConfig:
    max_rounds: int = MAX_ROUNDS
    cap: int | None = DEFAULT_CAP
    seed: int = 0
    retry: int = 1
    concurrent_agents: bool = True

    def __post_init__(self):
        if not 1 <= self.max_rounds <= MAX_ROUNDS:
            raise ConfigError("protocol.max_rounds", f"must be in 1..{MAX_ROUNDS}, got {self.max_rounds}")


def _require_backends(backends: Mapping[AgentRole, AgentBackend]) -> None:
    missing = [r.value for r in AgentRole if r not in backends]
    if missing:
        raise ConfigError("backends", "no backend for " + ", ".join(missing))


def decide(
    target: Triple,
    g: KnowledgeGraph,
    backends: Mapping[AgentRole, AgentBackend],
    config: ProtocolConfig | None = None,
) -> Decision:
    """Run the full two-phase decision for one triple.

    Rounds are barriers: the four agents of a round may be queried
    concurrently, but round ``n + 1`` prompts are built only from completed
    round ``n`` turns. Discussion stops early only on a 4-0 consensus.
    """
    config = config or ProtocolConfig()
    _require_backends(backends)
    target = Triple(*target)
    subgraphs = extract_all_four(g, target, config.cap, config.seed)
    key = g.key(target)
    transcript = DiscussionTranscript()

    def ask(role: AgentRole, rnd: int) -> AgentTurn:
        sg = subgraphs[role.kind]
        if rnd == 0:
            prompt = build_analysis_prompt(g, target, sg, role)
        else:
            prompt = build_discussion_prompt(g, target, sg, role, transcript.turns)
        try:
            verdict, rationale, raw = query_and_parse(backends[role], prompt, QueryContext(role, rnd, key), config.retry)
        except TransportError as exc:
            raise TransportError(f"{g.render(target)} [{role.value} round {rnd}]: {exc}") from exc
        return AgentTurn(role, rnd, verdict, rationale, raw)

    pool = ThreadPoolExecutor(max_workers=len(DIRECTIONAL_ROLES)) if config.concurrent_agents else None
    try:
        state = TIE
        for rnd in range(config.max_rounds + 1):
            if pool is not None:
                turns = list(pool.map(lambda r: ask(r, rnd), DIRECTIONAL_ROLES))
            else:
                turns = [ask(r, rnd) for r in DIRECTIONAL_ROLES]
            transcript.turns.extend(turns)
            state = tally([t.verdict for t in turns])
            if state.is_consensus:
                return Decision(target, state.label, Method.CONSENSUS, rnd, transcript)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    rounds = config.max_rounds
    if not state.is_tie:
        return Decision(target, state.label, Method.MAJORITY, rounds, transcript)

    prompt = build_summarizer_prompt(g, target, transcript.turns, rounds)
    try:
        verdict, rationale, raw = query_and_parse(
            backends[AgentRole.SUMMARIZER], prompt, QueryContext(AgentRole.SUMMARIZER, rounds, key), config.retry
        )
    except TransportError as exc:
        raise TransportError(f"{g.render(target)} [Summarizer]: {exc}") from exc
    if verdict is Verdict.ABSTAIN:
        raise SummarizerFailure(f"{g.render(target)}: summarizer gave no verdict: {raw[:200]!r}")
    summary = AgentTurn(AgentRole.SUMMARIZER, rounds, verdict, rationale, raw)
    return Decision(target, _label(verdict), Method.SUMMARIZER, rounds, transcript, summary)


@dataclass(frozen=True)
class RunStats:
    n: int
    mean_rounds: float
    tie_fraction: float
    methods: dict[str, int]

    @classmethod
    def from_decisions(cls, decisions) -> RunStats:
        decisions = [d for d in decisions if d is not None]
        n = len(decisions)
        methods = {m.value: 0 for m in Method}
        for d in decisions:
            methods[Method(d.method).value] += 1
        if n == 0:
            return cls(0, 0.0, 0.0, methods)
        return cls(
            n,
            sum(d.rounds_used for d in decisions) / n,
            methods[Method.SUMMARIZER.value] / n,
            methods,
        )


@dataclass
class BatchResult:
    decisions: list[Decision | None]
    errors: dict[int, MakgedError]
    stats: RunStats


def detect_batch(
    targets: Sequence[Triple],
    g: KnowledgeGraph,
    backends: Mapping[AgentRole, AgentBackend],
    config: ProtocolConfig | None = None,
    parallelism: int = 1,
) -> BatchResult:
    """Decide every target; failures are recorded per index and do not stop the batch."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    config = config or ProtocolConfig()
    _require_backends(backends)

    def run(target: Triple) -> Decision | MakgedError:
        try:
            return decide(target, g, backends, config)
        except MakgedError as exc:
            return exc

    if parallelism == 1:
        outcomes = [run(t) for t in targets]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(run, targets))

    decisions: list[Decision | None] = []
    errors: dict[int, MakgedError] = {}
    for i, out in enumerate(outcomes):
        if isinstance(out, Decision):
            decisions.append(out)
        else:
            decisions.append(None)
            errors[i] = out
    return BatchResult(decisions, errors, RunStats.from_decisions(decisions))


# -- JSON lines -------------------------------------------------------------


def _turn_json(turn: AgentTurn) -> dict:
    return {"role": turn.role.value, "round": turn.round, "verdict": turn.verdict.value, "rationale": turn.rationale}


def decision_to_json(g: KnowledgeGraph, d: Decision) -> dict:
    h, r, t = g.surfaces(d.triple)
    obj = {
        "triple": {"head": h, "relation": r, "tail": t},
        "label": d.label.value,
        "method": d.method.value,
        "rounds_used": d.rounds_used,
        "turns": [_turn_json(t) for t in d.transcript.turns],
    }
    if d.summary is not None:
        obj["summary"] = _turn_json(d.summary)
    return obj


def error_to_json(g: KnowledgeGraph, triple: Triple, exc: MakgedError) -> dict:
    h, r, t = g.surfaces(triple)
    return {"triple": {"head": h, "relation": r, "tail": t}, "error": {"category": exc.category, "message": str(exc)}}


def write_decisions(path, g: KnowledgeGraph, targets: Sequence[Triple], result: BatchResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, (target, d) in enumerate(zip(targets, result.decisions)):
            obj = decision_to_json(g, d) if d is not None else error_to_json(g, target, result.errors[i])
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class DecisionRecord:
    """A decision line read back from disk, keyed by surface strings."""

    triple: tuple[str, str, str]
    label: Label | None
    method: Method | None
    rounds_used: int
    turns: list[dict]
    summary: dict | None = None
    error: dict | None = None

    @property
    def key(self) -> str:
        return "\t".join(self.triple)


def read_decisions(path) -> list[DecisionRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            tr = obj["triple"]
            out.append(
                DecisionRecord(
                    (tr["head"], tr["relation"], tr["tail"]),
                    Label(obj["label"]) if obj.get("label") else None,
                    Method(obj["method"]) if obj.get("method") else None,
                    int(obj.get("rounds_used", 0)),
                    obj.get("turns", []),
                    obj.get("summary"),
                    obj.get("error"),
                )
            )
    return out
