"""Domain types: roles, states, actions, weighted edges, traces and engine settings."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import ConfigError, DuplicateRoleName, NoTerminatingRole, SchemaViolation

START_NAME = "START"
END_NAME = "END"
RESERVED_NAMES = frozenset({START_NAME, END_NAME})


@dataclass(frozen=True)
class RoleSpec:
    name: str
    prompt: str = ""
    may_terminate: bool = False
    cost: float = 1.0
    description: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name.strip():
            raise ConfigError("role name must be a non-empty string")
        if self.name != self.name.strip():
            raise ConfigError(f"role name {self.name!r} has surrounding whitespace")
        if self.name in RESERVED_NAMES:
            raise ConfigError(f"role name {self.name!r} is reserved")
        if not math.isfinite(self.cost) or self.cost < 0:
            raise ConfigError(f"role {self.name!r}: cost must be finite and >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "prompt": self.prompt,
            "may_terminate": self.may_terminate,
            "cost": self.cost,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RoleSpec":
        _check_keys(data, {"name", "prompt", "may_terminate", "cost", "description"}, "role")
        if "name" not in data:
            raise ConfigError("role entry is missing 'name'")
        return cls(
            name=data["name"],
            prompt=str(data.get("prompt", "")),
            may_terminate=bool(data.get("may_terminate", False)),
            cost=float(data.get("cost", 1.0)),
            description=str(data.get("description", "")),
        )


class RoleSet(Mapping[str, RoleSpec]):
    """Validated, ordered, immutable collection of roles keyed by name."""

    def __init__(self, roles: Iterable[RoleSpec]):
        self._roles: dict[str, RoleSpec] = {}
        for role in roles:
            if role.name in self._roles:
                raise DuplicateRoleName(role.name)
            self._roles[role.name] = role

    def __getitem__(self, name: str) -> RoleSpec:
        return self._roles[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._roles)

    def __len__(self) -> int:
        return len(self._roles)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoleSet):
            return NotImplemented
        return list(self._roles.values()) == list(other._roles.values())

    def __hash__(self) -> int:
        return hash(tuple(self._roles.values()))

    def __repr__(self) -> str:
        return f"RoleSet({list(self._roles)!r})"

    @property
    def specs(self) -> list[RoleSpec]:
        return list(self._roles.values())

    def terminators(self) -> list[str]:
        return [r.name for r in self._roles.values() if r.may_terminate]

    def to_list(self) -> list[dict[str, Any]]:
        return [r.to_dict() for r in self._roles.values()]

    @classmethod
    def from_list(cls, items: Sequence[Mapping[str, Any]]) -> "RoleSet":
        return validate_role_set([RoleSpec.from_dict(item) for item in items])


def validate_role_set(roles: Sequence[RoleSpec]) -> RoleSet:
    """Build a RoleSet, rejecting duplicate names and sets nobody can terminate."""
    if not roles:
        raise ConfigError("role list is empty")
    role_set = RoleSet(roles)
    if not role_set.terminators():
        raise NoTerminatingRole("at least one role must have may_terminate = true")
    return role_set


@dataclass(frozen=True)
class Action:
    """Either a hand-off to a named role or the terminal END action."""

    role: str | None = None

    @classmethod
    def goto(cls, role: str) -> "Action":
        return cls(role)

    @property
    def is_end(self) -> bool:
        return self.role is None

    @property
    def name(self) -> str:
        return END_NAME if self.role is None else self.role

    @classmethod
    def from_name(cls, name: str) -> "Action":
        return END if name == END_NAME else cls(name)

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return "END" if self.role is None else f"Goto({self.role!r})"


END = Action()


@dataclass(frozen=True)
class State:
    """The role that just acted; ``role=None`` is the synthetic START state."""

    role: str | None = None

    @property
    def is_start(self) -> bool:
        return self.role is None

    @property
    def name(self) -> str:
        return START_NAME if self.role is None else self.role

    @classmethod
    def from_name(cls, name: str) -> "State":
        return START if name == START_NAME else cls(name)

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return "START" if self.role is None else f"State({self.role!r})"


START = State()


class Outcome(str, enum.Enum):
    SUCCESS = "Success"
    PRUNED = "Pruned"
    STEP_LIMIT = "StepLimit"
    AGENT_ERROR = "AgentError"


class Via(str, enum.Enum):
    """Why an action was put into a decision space."""

    TOP_K = "TopK"
    EXPLORATION = "Exploration"
    COLD_START = "ColdStart"


@dataclass(frozen=True)
class DecisionSpace:
    actions: tuple[Action, ...]
    via: tuple[Via, ...]

    def __post_init__(self) -> None:
        if len(self.actions) != len(self.via):
            raise ValueError("actions and via must have equal length")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("duplicate action in decision space")

    def __contains__(self, action: object) -> bool:
        return action in self.actions

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.actions]

    def tagged(self, via: Via) -> list[Action]:
        return [a for a, v in zip(self.actions, self.via) if v is via]

    def to_dict(self) -> dict[str, Any]:
        return {"actions": self.names, "via": [v.value for v in self.via]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DecisionSpace":
        return cls(
            actions=tuple(Action.from_name(n) for n in data["actions"]),
            via=tuple(Via(v) for v in data["via"]),
        )


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Message":
        return cls(role=str(data["role"]), content=str(data["content"]))


@dataclass(frozen=True)
class WeightedEdge:
    source: State
    target: Action
    reward: float
    step_index: int
    offered: DecisionSpace | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "from": self.source.name,
            "to": self.target.name,
            "reward": self.reward,
            "step": self.step_index,
        }
        if self.offered is not None:
            d["offered"] = self.offered.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WeightedEdge":
        offered = data.get("offered")
        return cls(
            source=State.from_name(data["from"]),
            target=Action.from_name(data["to"]),
            reward=float(data["reward"]),
            step_index=int(data["step"]),
            offered=DecisionSpace.from_dict(offered) if offered is not None else None,
        )


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
        )

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict[str, int]:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TokenUsage":
        return cls(int(data.get("prompt_tokens", 0)), int(data.get("completion_tokens", 0)))


@dataclass(frozen=True)
class EpisodeTrace:
    edges: tuple[WeightedEdge, ...]
    executed_roles: tuple[str, ...]
    cumulative_reward: float
    outcome: Outcome
    transcript: tuple[Message, ...] = ()
    query: str = ""
    episode_index: int = 0
    usage: TokenUsage = field(default_factory=TokenUsage)
    task_id: str | None = None

    @property
    def length(self) -> int:
        """Number of agents that were executed."""
        return len(self.executed_roles)

    def execution_counts(self) -> Counter[str]:
        return Counter(self.executed_roles)

    def recomputed_reward(self) -> float:
        return math.fsum(e.reward for e in self.edges)

    def to_dict(self) -> dict[str, Any]:
        return {
            "query": self.query,
            "episode_index": self.episode_index,
            "task_id": self.task_id,
            "outcome": self.outcome.value,
            "cumulative_reward": self.cumulative_reward,
            "executed_roles": list(self.executed_roles),
            "edges": [e.to_dict() for e in self.edges],
            "transcript": [m.to_dict() for m in self.transcript],
            "usage": self.usage.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EpisodeTrace":
        try:
            return cls(
                edges=tuple(WeightedEdge.from_dict(e) for e in data["edges"]),
                executed_roles=tuple(data["executed_roles"]),
                cumulative_reward=float(data["cumulative_reward"]),
                outcome=Outcome(data["outcome"]),
                transcript=tuple(Message.from_dict(m) for m in data.get("transcript", [])),
                query=str(data.get("query", "")),
                episode_index=int(data.get("episode_index", 0)),
                usage=TokenUsage.from_dict(data.get("usage", {})),
                task_id=data.get("task_id"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad trace document: {exc}") from exc


@dataclass(frozen=True)
class RewardConfig:
    """Reward components as (default value, scaling factor) pairs.

    The magnitude of a component is ``default * scale``. Roles additionally
    weight the execution penalty by their own ``cost``.
    """

    exec_penalty: float = 5.0
    exec_scale: float = 2.0
    repeat_penalty: float = 10.0
    repeat_scale: float = 1.0
    success_rate_scale: float = 5.0
    task_success_reward: float = 100.0
    task_success_scale: float = 1.0
    lambda_p: float = 10.0
    min_path_len: int = 2

    def __post_init__(self) -> None:
        for name in (
            "exec_penalty", "exec_scale", "repeat_penalty", "repeat_scale",
            "success_rate_scale", "task_success_reward", "task_success_scale", "lambda_p",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"reward.{name} must be finite and >= 0, got {value!r}")
        if self.min_path_len < 0:
            raise ConfigError("reward.min_path_len must be >= 0")

    def check_roles(self, roles: RoleSet) -> None:
        """Every step must cost more than the best success-rate bonus can pay back."""
        for role in roles.values():
            penalty = self.exec_penalty * self.exec_scale * role.cost
            if not penalty - self.success_rate_scale > 0:
                raise ConfigError(
                    f"role {role.name!r}: execution penalty {penalty:g} must exceed "
                    f"success_rate_scale {self.success_rate_scale:g}"
                )

    def to_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RewardConfig":
        _check_keys(data, set(cls.__dataclass_fields__), "reward")
        kwargs = {k: (int(v) if k == "min_path_len" else float(v)) for k, v in data.items()}
        return cls(**kwargs)


@dataclass(frozen=True)
class EngineConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon0: float = 0.3
    epsilon_decay: float = 0.95
    epsilon_min: float = 0.01
    top_k: int = 3
    cold_start_episodes: int = 30
    prune_threshold: float = -50.0
    max_steps: int = 12
    agent_timeout: float = 60.0
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        for name in ("epsilon0", "epsilon_min"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0 < self.epsilon_decay <= 1:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if self.epsilon_min > self.epsilon0:
            raise ConfigError("epsilon_min must not exceed epsilon0")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.cold_start_episodes < 0:
            raise ConfigError("cold_start_episodes must be >= 0")
        if not self.prune_threshold < 0:
            raise ConfigError("prune_threshold must be negative")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not self.agent_timeout > 0:
            raise ConfigError("agent_timeout must be positive")

    def to_dict(self) -> dict[str, Any]:
        d = {name: getattr(self, name) for name in self.__dataclass_fields__ if name != "reward"}
        d["reward"] = self.reward.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EngineConfig":
        _check_keys(data, set(cls.__dataclass_fields__), "engine")
        ints = {"top_k", "cold_start_episodes", "max_steps"}
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key == "reward":
                kwargs[key] = RewardConfig.from_dict(value or {})
            elif key in ints:
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


def _check_keys(data: Mapping[str, Any], allowed: set[str], where: str) -> None:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
