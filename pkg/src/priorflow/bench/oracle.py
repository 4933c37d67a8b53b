"""Exact Q* for small deterministic MDPs by value iteration.

Deliberately shares no code with :mod:`priorflow.qlearn`; states and actions
are plain strings here so the oracle can check the learner independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..core import END_NAME, START_NAME, RewardConfig, RoleSet, State, Action
from ..errors import NonConvergent
from ..reward import RoleStats, step_reward, terminal_reward


@dataclass(frozen=True)
class ExplicitMDP:
    """Deterministic MDP. ``transitions[(s, a)] = (s_next or None, reward)``; None is absorbing."""

    actions: Mapping[str, tuple[str, ...]]
    transitions: Mapping[tuple[str, str], tuple[str | None, float]]
    gamma: float

    @property
    def states(self) -> list[str]:
        return list(self.actions)


def value_iteration_oracle(
    mdp: ExplicitMDP, tol: float = 1e-12, max_sweeps: int = 1_000_000
) -> dict[tuple[str, str], float]:
    if not 0 <= mdp.gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {mdp.gamma}")
    q = {(s, a): 0.0 for s, acts in mdp.actions.items() for a in acts}
    for _ in range(max_sweeps):
        delta = 0.0
        for (s, a) in q:
            nxt, r = mdp.transitions[(s, a)]
            future = 0.0
            if nxt is not None and mdp.actions.get(nxt):
                future = max(q[(nxt, b)] for b in mdp.actions[nxt])
            new = r + mdp.gamma * future
            delta = max(delta, abs(new - q[(s, a)]))
            q[(s, a)] = new
        if delta < tol:
            return q
    raise NonConvergent(f"value iteration did not reach {tol} in {max_sweeps} sweeps")


def greedy_from(q: Mapping[tuple[str, str], float], mdp: ExplicitMDP) -> dict[str, str]:
    """Best action per state; ties go to the lexicographically smallest name."""
    return {s: min(acts, key=lambda a: (-q[(s, a)], a)) for s, acts in mdp.actions.items() if acts}


def role_mdp(
    roles: RoleSet,
    reward: RewardConfig,
    gamma: float,
    stats: RoleStats | None = None,
) -> ExplicitMDP:
    """The deterministic MDP the engine faces when rewards are stationary.

    States are START and every role; Goto(r) moves to r, END is absorbing.
    Rewards come from the reward module with frozen ``stats``. The short-path
    term of the END reward depends on history, so it must be switched off.
    """
    if reward.lambda_p > 0 and reward.min_path_len > 1:
        raise ValueError("path-length penalty makes END rewards history dependent; set min_path_len <= 1")
    stats = stats if stats is not None else RoleStats.for_roles(roles)
    actions: dict[str, tuple[str, ...]] = {}
    transitions: dict[tuple[str, str], tuple[str | None, float]] = {}
    for s_name in [START_NAME, *roles]:
        state = State.from_name(s_name)
        acts = list(roles)
        if not state.is_start and roles[s_name].may_terminate:
            acts.append(END_NAME)
        actions[s_name] = tuple(acts)
        for a in acts:
            if a == END_NAME:
                transitions[(s_name, a)] = (None, terminal_reward(1, reward))
            else:
                transitions[(s_name, a)] = (a, step_reward(state, Action.goto(a), reward, stats, roles))
    return ExplicitMDP(actions, transitions, gamma)
