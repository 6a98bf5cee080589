"""Pluggable reply sources for agents: scripted policies, replay fixtures, remote chat."""

from __future__ import annotations

import hashlib
import json
import os
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import httpx

from ..errors import TransportError
from .roles import AgentRole, Verdict

DEFAULT_API_KEY_ENV = "MAKGED_API_KEY"
SYSTEM_PROMPT = "You judge whether knowledge graph triples are correct. Follow the requested reply format exactly."


@dataclass(frozen=True)
class QueryContext:
    role: AgentRole
    round: int
    triple_key: str


@runtime_checkable
class AgentBackend(Protocol):
    name: str

    def complete(self, prompt: str, context: QueryContext) -> str: ...


_VERDICT_RE = re.compile(r"verdict\s*\**\s*:\s*\**\s*(incorrect|correct)\b(?![ \t]*[|/])", re.IGNORECASE)
_REASON_RE = re.compile(
    r"reason\s*\**\s*:\s*\**\s*(.*?)(?=\n\s*\**\s*verdict\s*\**\s*:|\Z)", re.IGNORECASE | re.DOTALL
)


def parse_reply(reply: str) -> tuple[Verdict, str] | None:
    """``(verdict, rationale)`` from a reply, or ``None`` if it has no verdict line."""
    m = _VERDICT_RE.search(reply)
    if m is None:
        return None
    verdict = Verdict(m.group(1).lower())
    r = _REASON_RE.search(reply)
    if r is not None:
        rationale = r.group(1).strip()
    else:
        rationale = (reply[: m.start()] + reply[m.end() :]).strip()
    return verdict, rationale


def query_and_parse(
    backend: AgentBackend, prompt: str, context: QueryContext, retry: int = 1
) -> tuple[Verdict, str, str]:
    """Ask ``backend`` and parse the verdict, re-asking up to ``retry`` times.

    Returns ``(verdict, rationale, raw_reply)``; an unparsable final reply
    yields ``Verdict.ABSTAIN`` with the raw reply as rationale. Transport
    failures propagate as :class:`TransportError`.
    """
    reply = ""
    for _ in range(retry + 1):
        try:
            reply = backend.complete(prompt, context)
        except TransportError:
            raise
        except Exception as exc:  # backends must not leak arbitrary errors into the protocol
            raise TransportError(f"{backend.name}: {type(exc).__name__}: {exc}") from exc
        parsed = parse_reply(reply)
        if parsed is not None:
            return parsed[0], parsed[1], reply
    return Verdict.ABSTAIN, reply, reply


def format_reply(verdict: Verdict, reason: str) -> str:
    if verdict is Verdict.ABSTAIN:
        return f"I cannot decide. {reason}"
    return f"VERDICT: {verdict.value}\nREASON: {reason}"


Policy = Callable[[QueryContext, str], "Verdict | str"]


class ScriptedBackend:
    """Deterministic replies from a policy ``(context, prompt) -> Verdict | reply text``."""

    def __init__(self, policy: Policy, name: str = "scripted"):
        self.policy = policy
        self.name = name

    def complete(self, prompt: str, context: QueryContext) -> str:
        out = self.policy(context, prompt)
        if isinstance(out, Verdict):
            return format_reply(out, f"scripted {context.role.value} round {context.round}")
        return out

    @classmethod
    def fixed(cls, verdicts: Sequence[Verdict | str]) -> ScriptedBackend:
        """Round ``i`` answers ``verdicts[i]``; the last entry repeats."""
        seq = [v if isinstance(v, Verdict) else Verdict(v) for v in verdicts]
        if not seq:
            raise ValueError("need at least one verdict")
        return cls(lambda ctx, _: seq[min(ctx.round, len(seq) - 1)], name="scripted-fixed")

    @classmethod
    def hashed(cls, incorrect_rate: float = 0.3, salt: str = "") -> ScriptedBackend:
        """Pseudo-random verdicts from a SHA-256 of the prompt: reproducible but varied."""
        if not 0.0 <= incorrect_rate <= 1.0:
            raise ValueError("incorrect_rate must be in [0, 1]")

        def policy(ctx: QueryContext, prompt: str) -> str:
            digest = hashlib.sha256((salt + "\x00" + prompt).encode("utf-8")).digest()
            u = int.from_bytes(digest[:8], "big") / 2.0**64
            verdict = Verdict.INCORRECT if u < incorrect_rate else Verdict.CORRECT
            return format_reply(verdict, f"hash score {u:.4f} for {ctx.role.value} in round {ctx.round}")

        return cls(policy, name="scripted-hash")


class ReplayBackend:
    """Replies looked up by ``(role, round, triple key)`` from a recorded fixture.

    Fixture layout::

        {"replies": [{"role": "Head_Forward_Agent", "round": 0,
                      "triple": "head\\trelation\\ttail", "reply": "VERDICT: ..."}]}
    """

    def __init__(self, replies: Mapping[tuple[str, int, str], str], name: str = "replay"):
        self.replies = dict(replies)
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayBackend:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        entries = doc["replies"] if isinstance(doc, dict) else doc
        replies = {}
        for e in entries:
            role = AgentRole.parse(e["role"]).value
            replies[(role, int(e["round"]), e["triple"])] = e["reply"]
        return cls(replies, name=f"replay:{Path(path).name}")

    def complete(self, prompt: str, context: QueryContext) -> str:
        key = (context.role.value, context.round, context.triple_key)
        try:
            return self.replies[key]
        except KeyError:
            raise TransportError(f"{self.name}: no recorded reply for {key!r}") from None


class RemoteChatBackend:
    """JSON chat-completions client (system + user messages in, assistant text out)."""

    def __init__(
        self,
        url: str,
        model: str,
        temperature: float = 0.0,
        timeout_seconds: float = 60.0,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        retries: int = 2,
        system_prompt: str = SYSTEM_PROMPT,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.retries = retries
        self.system_prompt = system_prompt
        self.name = f"remote:{model}"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout_seconds, headers=headers, transport=transport)

    def request_body(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.system_prompt},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.temperature,
        }

    @staticmethod
    def extract_text(data: dict) -> str:
        if "choices" in data:
            return data["choices"][0]["message"]["content"]
        if "message" in data:
            return data["message"]["content"]
        return data["content"]

    def complete(self, prompt: str, context: QueryContext) -> str:
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._client.post(self.url, json=self.request_body(prompt))
                resp.raise_for_status()
                return self.extract_text(resp.json())
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                last = exc
        raise TransportError(f"{self.name}: {type(last).__name__}: {last}")

    def close(self) -> None:
        self._client.close()
