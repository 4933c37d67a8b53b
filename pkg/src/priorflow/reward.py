"""Per-transition rewards and per-role success statistics."""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .core import Action, EpisodeTrace, Outcome, RewardConfig, RoleSet, State
from .errors import SchemaViolation, UnknownRole

__all__ = [
    "RewardConfig",
    "RoleStats",
    "component_reward",
    "record_episode",
    "step_reward",
    "success_rate",
    "terminal_reward",
]


@dataclass
class RoleStats:
    """Execution and success counters per role."""

    n_execute: dict[str, int] = field(default_factory=dict)
    n_success: dict[str, int] = field(default_factory=dict)

    @classmethod
    def for_roles(cls, roles: Iterable[str]) -> "RoleStats":
        names = list(roles)
        return cls({n: 0 for n in names}, {n: 0 for n in names})

    def __contains__(self, role: object) -> bool:
        return role in self.n_execute

    def copy(self) -> "RoleStats":
        return copy.deepcopy(self)

    def to_dict(self) -> dict[str, Any]:
        return {
            role: {"n_execute": self.n_execute[role], "n_success": self.n_success.get(role, 0)}
            for role in sorted(self.n_execute)
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RoleStats":
        stats = cls()
        for role, counts in data.items():
            try:
                ex, ok = int(counts["n_execute"]), int(counts["n_success"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"role stats for {role!r}: {exc}") from exc
            if not 0 <= ok <= ex:
                raise SchemaViolation(f"role stats for {role!r}: need 0 <= n_success <= n_execute")
            stats.n_execute[role] = ex
            stats.n_success[role] = ok
        return stats


def component_reward(default: float, scale: float) -> float:
    return default * scale


def success_rate(stats: RoleStats, role: str) -> float:
    if role not in stats:
        raise UnknownRole(role)
    executed = stats.n_execute[role]
    if executed == 0:
        return 0.0
    return stats.n_success.get(role, 0) / executed


def step_reward(
    s: State,
    next_action: Action,
    cfg: RewardConfig,
    stats: RoleStats,
    roles: RoleSet,
) -> float:
    """Reward for handing control from ``s`` to another role.

    The execution penalty is weighted by the target role's cost; its
    historical success rate pays part of it back. Handing control to the role
    that just acted costs the repeat penalty on top.
    """
    if next_action.is_end:
        raise ValueError("step_reward is for hand-offs; use terminal_reward for END")
    role = next_action.role
    if role not in roles:
        raise UnknownRole(role)
    r = -component_reward(cfg.exec_penalty, cfg.exec_scale) * roles[role].cost
    r += cfg.success_rate_scale * success_rate(stats, role)
    if role == s.role:
        r -= component_reward(cfg.repeat_penalty, cfg.repeat_scale)
    return r


def terminal_reward(path_len: int, cfg: RewardConfig) -> float:
    if path_len < 0:
        raise ValueError("path_len must be >= 0")
    shortfall = max(0, cfg.min_path_len - path_len)
    return component_reward(cfg.task_success_reward, cfg.task_success_scale) - cfg.lambda_p * shortfall


def record_episode(stats: RoleStats, trace: EpisodeTrace) -> RoleStats:
    """Fold a finished episode into ``stats`` in place; returns ``stats``."""
    counts: Counter[str] = trace.execution_counts()
    success = trace.outcome is Outcome.SUCCESS
    for role, n in counts.items():
        stats.n_execute[role] = stats.n_execute.get(role, 0) + n
        stats.n_success.setdefault(role, 0)
        if success:
            stats.n_success[role] += n
    return stats
