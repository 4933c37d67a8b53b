"""Prompt rendering and the ``/* next_node: X */`` hand-off marker."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Collection, Sequence

from ..core import END, END_NAME, Action, Message, TokenUsage
from ..errors import MissingPlaceholder, NoMarkerFound, UnknownRoleName

NEXT_NODE_RE = re.compile(r"/\*\s*next_node\s*:\s*(.*?)\s*\*/", re.DOTALL)
REQUIRED_PLACEHOLDERS = ("prev_nodes", "next_avail_nodes")
KNOWN_PLACEHOLDERS = frozenset(REQUIRED_PLACEHOLDERS) | {"query"}
# Names an agent may use in the marker to stop the workflow.
END_ALIASES = frozenset({END_NAME, "FINAL ANSWER", "FINAL_ANSWER"})


@dataclass(frozen=True)
class AgentRequest:
    system_prompt: str
    role_prompt: str
    query: str
    transcript: tuple[Message, ...] = ()
    # Structured copies of what the rendered prompt says, for scripted agents.
    role: str | None = None
    prev_nodes: tuple[str, ...] = ()
    next_avail: tuple[str, ...] = ()
    step: int = 0
    retry_notice: str | None = None


@dataclass(frozen=True)
class AgentResponse:
    content: str
    next_node: Action | None = None
    usage: TokenUsage = field(default_factory=TokenUsage)


def format_marker(action: Action | str) -> str:
    name = action.name if isinstance(action, Action) else action
    return f"/* next_node: {name} */"


def parse_next_node(content: str, roles: Collection[str]) -> Action:
    """Return the action named by the last next_node marker in ``content``."""
    matches = NEXT_NODE_RE.findall(content)
    if not matches:
        raise NoMarkerFound("no '/* next_node: ... */' marker in agent output")
    name = matches[-1].strip()
    if name in END_ALIASES:
        return END
    if name not in roles:
        raise UnknownRoleName(name)
    return Action.goto(name)


def placeholders(template: str) -> set[str]:
    try:
        return {f for _, f, _, _ in string.Formatter().parse(template) if f is not None}
    except ValueError as exc:
        raise MissingPlaceholder(f"malformed template: {exc}") from exc


def render_prompt(
    template: str,
    prev_nodes: Sequence[str],
    next_avail: Sequence[str],
    query: str = "",
    transcript: Sequence[Message] = (),
    role_prompt: str = "",
    role: str | None = None,
    step: int = 0,
) -> AgentRequest:
    fields = placeholders(template)
    missing = [p for p in REQUIRED_PLACEHOLDERS if p not in fields]
    if missing:
        raise MissingPlaceholder(f"template lacks {{{missing[0]}}}")
    unresolved = fields - KNOWN_PLACEHOLDERS
    if unresolved:
        raise MissingPlaceholder(f"no value for placeholder(s) {sorted(unresolved)}")
    system = template.format(
        prev_nodes=", ".join(prev_nodes),
        next_avail_nodes=", ".join(next_avail),
        query=query,
    )
    return AgentRequest(
        system_prompt=system,
        role_prompt=role_prompt,
        query=query,
        transcript=tuple(transcript),
        role=role,
        prev_nodes=tuple(prev_nodes),
        next_avail=tuple(next_avail),
        step=step,
    )
