"""Run configuration: a YAML document validated into :class:`RunConfig`."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .agents import DEFAULT_API_KEY_ENV, AgentBackend, AgentRole, RemoteChatBackend, ReplayBackend, ScriptedBackend
from .errors import ConfigError
from .protocol import MAX_ROUNDS, ProtocolConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CorruptionConfig(_Strict):
    rate: float = Field(0.3, gt=0.0, lt=1.0)
    top_k: int = Field(10, ge=1)
    seed: int = 0


class SimilarityConfig(_Strict):
    dim: int = Field(64, ge=2)
    epochs: int = Field(100, ge=0)
    margin: float = Field(1.0, gt=0.0)
    lr: float = Field(0.01, ge=0.0)


class EncoderConfig(_Strict):
    dim: int = Field(64, ge=1)
    hidden: int = Field(128, ge=1)
    lr: float = Field(0.001, ge=0.0)
    batch: int = Field(64, ge=1)
    epochs: int = Field(100, ge=0)
    seed: int = 0


class ProtocolSection(_Strict):
    max_rounds: int = Field(MAX_ROUNDS, ge=1, le=MAX_ROUNDS)
    cap: int = Field(25, ge=1)
    parallelism: int = Field(1, ge=1)
    seed: int = 0
    retry: int = Field(1, ge=0)

    def to_protocol(self) -> ProtocolConfig:
        return ProtocolConfig(max_rounds=self.max_rounds, cap=self.cap, seed=self.seed, retry=self.retry)


class ScriptedFixedSpec(_Strict):
    type: Literal["scripted"]
    mode: Literal["fixed"] = "fixed"
    verdicts: list[Literal["correct", "incorrect", "abstain"]] = Field(min_length=1)


class ScriptedHashSpec(_Strict):
    type: Literal["scripted-hash"]
    incorrect_rate: float = Field(0.3, ge=0.0, le=1.0)
    salt: str = ""


class ReplaySpec(_Strict):
    type: Literal["replay"]
    fixture: Path


class RemoteSpec(_Strict):
    type: Literal["remote"]
    url: str
    model: str
    temperature: float = Field(0.0, ge=0.0)
    timeout_seconds: float = Field(60.0, gt=0.0)
    api_key_env: str = DEFAULT_API_KEY_ENV
    retries: int = Field(2, ge=0)


BackendSpec = Annotated[
    Union[ScriptedFixedSpec, ScriptedHashSpec, ReplaySpec, RemoteSpec], Field(discriminator="type")
]


class BackendsSection(_Strict):
    """Per-role backends; ``default`` fills every role not listed."""

    default: BackendSpec | None = None
    head_forward: BackendSpec | None = None
    head_backward: BackendSpec | None = None
    tail_forward: BackendSpec | None = None
    tail_backward: BackendSpec | None = None
    summarizer: BackendSpec | None = None

    def spec_for(self, role: AgentRole):
        return getattr(self, role.name.lower()) or self.default


class RunConfig(_Strict):
    kg: Path | None = None
    dataset: Path | None = None
    output: Path | None = None
    corruption: CorruptionConfig = CorruptionConfig()
    similarity: SimilarityConfig = SimilarityConfig()
    encoder: EncoderConfig = EncoderConfig()
    protocol: ProtocolSection = ProtocolSection()
    backends: BackendsSection = BackendsSection()

    @model_validator(mode="after")
    def _paths_exist(self):
        for name in ("kg", "dataset"):
            p = getattr(self, name)
            if p is not None and not p.exists():
                raise ValueError(f"{name}: path {p} does not exist")
        return self


def _resolve(doc: dict, base: Path) -> dict:
    """Make relative paths in the document relative to the config file's directory."""
    for key in ("kg", "dataset", "output"):
        if isinstance(doc.get(key), str) and not Path(doc[key]).is_absolute():
            doc[key] = str(base / doc[key])
    for spec in (doc.get("backends") or {}).values():
        if isinstance(spec, dict) and isinstance(spec.get("fixture"), str) and not Path(spec["fixture"]).is_absolute():
            spec["fixture"] = str(base / spec["fixture"])
    return doc


def parse_config(doc: dict | None, base: Path = Path(".")) -> RunConfig:
    try:
        return RunConfig.model_validate(_resolve(dict(doc or {}), base))
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(loc, err["msg"]) from None


def validate_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("<file>", f"{path} does not exist")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a mapping")
    return parse_config(doc, path.parent)


def make_backend(spec) -> AgentBackend:
    if isinstance(spec, ScriptedFixedSpec):
        return ScriptedBackend.fixed(spec.verdicts)
    if isinstance(spec, ScriptedHashSpec):
        return ScriptedBackend.hashed(spec.incorrect_rate, spec.salt)
    if isinstance(spec, ReplaySpec):
        return ReplayBackend.from_file(spec.fixture)
    return RemoteChatBackend(
        spec.url, spec.model, spec.temperature, spec.timeout_seconds, spec.api_key_env, spec.retries
    )


def build_backends(section: BackendsSection) -> dict[AgentRole, AgentBackend]:
    out = {}
    for role in AgentRole:
        spec = section.spec_for(role)
        if spec is None:
            raise ConfigError(f"backends.{role.name.lower()}", "no backend configured and no default")
        out[role] = make_backend(spec)
    return out
