"""Agent backends that need no network: fixed scripts and policy callables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

from ..core import Action, TokenUsage
from ..errors import AgentBackendFailure
from .protocol import AgentRequest, AgentResponse, format_marker


@runtime_checkable
class AgentBackend(Protocol):
    def invoke(self, request: AgentRequest, timeout: float | None = None) -> AgentResponse: ...


def invoke(backend: AgentBackend, request: AgentRequest, timeout: float | None = None) -> AgentResponse:
    return backend.invoke(request, timeout=timeout)


@dataclass(frozen=True)
class ScriptStep:
    content: str
    next_node: Action | None = None
    usage: TokenUsage = TokenUsage()


class ScriptedBackend:
    """Replays a fixed script, indexed by the request's step number.

    The backend holds no mutable state, so ``invoke`` is a pure function of
    ``(script, request.step)``.
    """

    def __init__(self, script: Sequence[ScriptStep | tuple]):
        self.script = tuple(s if isinstance(s, ScriptStep) else ScriptStep(*s) for s in script)

    def invoke(self, request: AgentRequest, timeout: float | None = None) -> AgentResponse:
        if not 0 <= request.step < len(self.script):
            raise AgentBackendFailure(f"script has no entry for step {request.step}")
        step = self.script[request.step]
        return AgentResponse(step.content, step.next_node, step.usage)


def word_usage(request: AgentRequest, content: str) -> TokenUsage:
    """Deterministic stand-in for tokenizer counts: whitespace-separated words."""
    prompt = [request.system_prompt, request.role_prompt, request.query]
    prompt.extend(m.content for m in request.transcript)
    return TokenUsage(sum(len(p.split()) for p in prompt), len(content.split()))


class PolicyBackend:
    """Agents whose hand-off decision is computed by a callable.

    ``decide(request)`` returns the next action; the backend writes a short
    message ending in the standard marker so the engine parses it like any
    other agent output.
    """

    def __init__(
        self,
        decide: Callable[[AgentRequest], Action],
        usage: Callable[[AgentRequest, str], TokenUsage] = word_usage,
    ):
        self.decide = decide
        self.usage = usage

    def invoke(self, request: AgentRequest, timeout: float | None = None) -> AgentResponse:
        action = self.decide(request)
        content = f"{request.role} finished step {request.step}.\n{format_marker(action)}"
        return AgentResponse(content, None, self.usage(request, content))
