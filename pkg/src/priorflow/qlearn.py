"""Tabular Q-learning: storage, TD updates, top-k and epsilon-greedy decision spaces."""

from __future__ import annotations

import copy
import json
import math
import os
import random
from pathlib import Path
from typing import Any, Collection, Iterable, Iterator

from .core import Action, DecisionSpace, State, Via
from .errors import EmptyActionSet, IoFailure, NonFiniteReward, SchemaViolation

QTABLE_SCHEMA_VERSION = 1

Key = tuple[State, Action]


class QTable:
    """Sparse Q-table. Entries that were never written read as exactly 0."""

    def __init__(self, alpha: float = 0.1, gamma: float = 0.9):
        self.alpha = alpha
        self.gamma = gamma
        self._q: dict[Key, float] = {}
        self._n: dict[Key, int] = {}

    def get(self, state: State, action: Action) -> float:
        return self._q.get((state, action), 0.0)

    def count(self, state: State, action: Action) -> int:
        return self._n.get((state, action), 0)

    def set(self, state: State, action: Action, value: float, count: int | None = None) -> None:
        if not math.isfinite(value):
            raise ValueError(f"Q-value must be finite, got {value!r}")
        self._q[(state, action)] = value
        if count is not None:
            self._n[(state, action)] = count

    def row(self, state: State) -> dict[Action, float]:
        """Stored entries for one state."""
        return {a: v for (s, a), v in self._q.items() if s == state}

    def states(self) -> list[State]:
        return sorted({s for s, _ in self._q}, key=lambda s: (not s.is_start, s.name))

    def items(self) -> Iterator[tuple[State, Action, float, int]]:
        for (s, a), v in self._q.items():
            yield s, a, v, self._n.get((s, a), 0)

    def max_value(self, state: State, actions: Iterable[Action] | None = None) -> float:
        if actions is None:
            row = self.row(state)
            return max(row.values()) if row else 0.0
        values = [self.get(state, a) for a in actions]
        return max(values) if values else 0.0

    def copy(self) -> "QTable":
        """Independent snapshot; safe to hand to readers while training continues."""
        return copy.deepcopy(self)

    def __len__(self) -> int:
        return len(self._q)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return (
            self.alpha == other.alpha
            and self.gamma == other.gamma
            and self._q == other._q
            and self._n == other._n
        )

    def __repr__(self) -> str:
        return f"QTable(alpha={self.alpha}, gamma={self.gamma}, entries={len(self._q)})"


def td_update(
    q: QTable,
    s: State,
    a: Action,
    r: float,
    s_next: State | None,
    alpha: float | None = None,
    gamma: float | None = None,
    next_actions: Collection[Action] | None = None,
) -> QTable:
    """One temporal-difference step on ``q`` in place; returns ``q``.

    ``s_next=None`` marks an absorbing successor (after END) whose value is 0.
    ``next_actions`` restricts the bootstrap max to the actions available in
    ``s_next``; absent entries among them count as 0.
    """
    alpha = q.alpha if alpha is None else alpha
    gamma = q.gamma if gamma is None else gamma
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    if not math.isfinite(r):
        raise NonFiniteReward(repr(r))

    future = 0.0 if s_next is None else q.max_value(s_next, next_actions)
    target = r + gamma * future
    new = (1 - alpha) * q.get(s, a) + alpha * target
    q.set(s, a, new, q.count(s, a) + 1)
    return q


def _ranked(q: QTable, s: State, available: Iterable[Action]) -> list[Action]:
    # Descending Q, then name ascending.
    return sorted(set(available), key=lambda a: (-q.get(s, a), a.name))


def greedy_policy(q: QTable, s: State, available: Collection[Action]) -> Action:
    if not available:
        raise EmptyActionSet(f"no actions available in state {s}")
    return _ranked(q, s, available)[0]


def top_k(q: QTable, s: State, available: Collection[Action], k: int) -> list[Action]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not available:
        raise EmptyActionSet(f"no actions available in state {s}")
    return _ranked(q, s, available)[:k]


def decision_space(
    q: QTable,
    s: State,
    available: Collection[Action],
    k: int,
    epsilon: float,
    cold_start: bool,
    rng: random.Random,
) -> DecisionSpace:
    """Actions offered to the agent in state ``s``.

    During cold start every available action is offered. Otherwise the top-k
    actions are offered and, with probability ``epsilon``, one extra action
    drawn uniformly from the rest.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if not available:
        raise EmptyActionSet(f"no actions available in state {s}")
    if cold_start:
        actions = sorted(set(available), key=lambda a: a.name)
        return DecisionSpace(tuple(actions), (Via.COLD_START,) * len(actions))

    best = top_k(q, s, available, k)
    via = [Via.TOP_K] * len(best)
    # The coin is always flipped so the random stream does not depend on |available|.
    explore = rng.random() < epsilon
    rest = sorted(set(available) - set(best), key=lambda a: a.name)
    if explore and rest:
        best.append(rng.choice(rest))
        via.append(Via.EXPLORATION)
    return DecisionSpace(tuple(best), tuple(via))


def decay_epsilon(epsilon: float, decay: float, floor: float) -> float:
    return max(floor, epsilon * decay)


def qtable_to_dict(q: QTable) -> dict[str, Any]:
    entries = [
        {"state": s.name, "action": a.name, "q": v, "n": n}
        for s, a, v, n in sorted(q.items(), key=lambda t: (t[0].name, t[1].name))
    ]
    return {"version": QTABLE_SCHEMA_VERSION, "alpha": q.alpha, "gamma": q.gamma, "entries": entries}


def qtable_from_dict(doc: Any) -> QTable:
    if not isinstance(doc, dict):
        raise SchemaViolation("Q-table document must be an object")
    if set(doc) != {"version", "alpha", "gamma", "entries"}:
        raise SchemaViolation(f"Q-table keys must be version, alpha, gamma, entries; got {sorted(doc)}")
    if doc["version"] != QTABLE_SCHEMA_VERSION:
        raise SchemaViolation(f"unsupported Q-table version {doc['version']!r}")
    alpha, gamma = doc["alpha"], doc["gamma"]
    if not _is_number(alpha) or not _is_number(gamma):
        raise SchemaViolation("alpha and gamma must be numbers")
    if not isinstance(doc["entries"], list):
        raise SchemaViolation("entries must be a list")
    q = QTable(alpha=float(alpha), gamma=float(gamma))
    for i, entry in enumerate(doc["entries"]):
        if not isinstance(entry, dict) or set(entry) != {"state", "action", "q", "n"}:
            raise SchemaViolation(f"entry {i}: expected keys state, action, q, n")
        if not isinstance(entry["state"], str) or not isinstance(entry["action"], str):
            raise SchemaViolation(f"entry {i}: state and action must be strings")
        if not _is_number(entry["q"]) or not math.isfinite(entry["q"]):
            raise SchemaViolation(f"entry {i}: q must be a finite number")
        n = entry["n"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise SchemaViolation(f"entry {i}: n must be a non-negative integer")
        s, a = State.from_name(entry["state"]), Action.from_name(entry["action"])
        if (s, a) in q._q:
            raise SchemaViolation(f"entry {i}: duplicate ({s}, {a})")
        q.set(s, a, float(entry["q"]), n)
    return q


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def save_qtable(q: QTable, destination: str | os.PathLike[str]) -> None:
    try:
        Path(destination).write_text(json.dumps(qtable_to_dict(q), indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_qtable(source: str | os.PathLike[str]) -> QTable:
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    return qtable_from_dict(doc)
