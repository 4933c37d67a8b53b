"""Dollar cost of token usage."""

from __future__ import annotations

from ..core import TokenUsage


def cost(usage: TokenUsage, price_prompt: float, price_completion: float) -> float:
    """``price_prompt * prompt_tokens + price_completion * completion_tokens``."""
    if price_prompt < 0 or price_completion < 0:
        raise ValueError("prices must be non-negative")
    return price_prompt * usage.prompt_tokens + price_completion * usage.completion_tokens
