"""Chat-completions backend for OpenAI-compatible HTTP endpoints."""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Any, Mapping

import httpx

from ..core import TokenUsage
from ..errors import ConfigError, NonRetryableApiError, Timeout, TransportFailure
from .protocol import AgentRequest, AgentResponse

log = logging.getLogger(__name__)

API_KEY_ENV = "PRIORFLOW_API_KEY"
BASE_URL_ENV = "PRIORFLOW_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class LlmSettings:
    model: str = "gpt-4o-mini"
    temperature: float = 0.1
    max_tokens: int = 2048
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    max_in_flight: int = 4
    price_prompt: float = 0.0
    price_completion: float = 0.0

    def __post_init__(self) -> None:
        if self.max_retries < 0 or self.max_in_flight < 1 or self.max_tokens < 1:
            raise ConfigError("llm: max_retries >= 0, max_in_flight >= 1, max_tokens >= 1 required")
        if self.price_prompt < 0 or self.price_completion < 0:
            raise ConfigError("llm: prices must be non-negative")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LlmSettings":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"llm: unknown key(s) {sorted(unknown)}")
        return cls(**data)


def build_messages(request: AgentRequest) -> list[dict[str, str]]:
    system = request.system_prompt
    if request.role_prompt:
        system = f"{system}\n\n{request.role_prompt}"
    messages = [{"role": "system", "content": system}, {"role": "user", "content": request.query}]
    for msg in request.transcript:
        messages.append({"role": "user", "content": f"[{msg.role}]\n{msg.content}"})
    if request.retry_notice:
        messages.append({"role": "user", "content": request.retry_notice})
    return messages


class ChatCompletionBackend:
    """One chat-completion round trip per agent turn, with bounded retries.

    Credentials come from ``PRIORFLOW_API_KEY`` / ``PRIORFLOW_BASE_URL``
    unless passed explicitly.
    """

    def __init__(
        self,
        settings: LlmSettings = LlmSettings(),
        *,
        api_key: str | None = None,
        base_url: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.settings = settings
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self._client = httpx.Client(transport=transport, timeout=settings.timeout)
        self._slots = threading.BoundedSemaphore(settings.max_in_flight)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def payload(self, request: AgentRequest) -> dict[str, Any]:
        return {
            "model": self.settings.model,
            "messages": build_messages(request),
            "temperature": self.settings.temperature,
            "max_tokens": self.settings.max_tokens,
        }

    def invoke(self, request: AgentRequest, timeout: float | None = None) -> AgentResponse:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        url = f"{self.base_url}/chat/completions"
        body = self.payload(request)
        timeout = timeout if timeout is not None else self.settings.timeout
        attempts = self.settings.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.settings.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(url, json=body, headers=headers, timeout=timeout)
            except httpx.TimeoutException as exc:
                last = Timeout(f"request timed out after {timeout}s")
                log.warning("attempt %d/%d timed out: %s", attempt + 1, attempts, exc)
                continue
            except httpx.TransportError as exc:
                last = TransportFailure(str(exc))
                log.warning("attempt %d/%d transport error: %s", attempt + 1, attempts, exc)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = TransportFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
                log.warning("attempt %d/%d got HTTP %d", attempt + 1, attempts, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise NonRetryableApiError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return _parse_completion(resp)
        assert last is not None
        raise last


def _parse_completion(resp: httpx.Response) -> AgentResponse:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"] or ""
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise NonRetryableApiError(f"malformed completion response: {exc}") from exc
    usage = data.get("usage") or {}
    return AgentResponse(
        content=content,
        usage=TokenUsage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
    )
