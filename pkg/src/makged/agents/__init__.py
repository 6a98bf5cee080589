from .backends import (
    DEFAULT_API_KEY_ENV,
    AgentBackend,
    QueryContext,
    RemoteChatBackend,
    ReplayBackend,
    ScriptedBackend,
    format_reply,
    parse_reply,
    query_and_parse,
)
from .prompts import build_analysis_prompt, build_discussion_prompt, build_summarizer_prompt, latest_turns
from .roles import DIRECTIONAL_ROLES, AgentRole, AgentTurn, Verdict

__all__ = [
    "DEFAULT_API_KEY_ENV",
    "DIRECTIONAL_ROLES",
    "AgentBackend",
    "AgentRole",
    "AgentTurn",
    "QueryContext",
    "RemoteChatBackend",
    "ReplayBackend",
    "ScriptedBackend",
    "Verdict",
    "build_analysis_prompt",
    "build_discussion_prompt",
    "build_summarizer_prompt",
    "format_reply",
    "latest_turns",
    "parse_reply",
    "query_and_parse",
]
