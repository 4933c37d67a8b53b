from .backends import AgentBackend, PolicyBackend, ScriptedBackend, ScriptStep, invoke
from .cost import cost
from .http import ChatCompletionBackend, LlmSettings
from .protocol import AgentRequest, AgentResponse, format_marker, parse_next_node, render_prompt

__all__ = [
    "AgentBackend",
    "AgentRequest",
    "AgentResponse",
    "ChatCompletionBackend",
    "LlmSettings",
    "PolicyBackend",
    "ScriptStep",
    "ScriptedBackend",
    "cost",
    "format_marker",
    "invoke",
    "parse_next_node",
    "render_prompt",
]
