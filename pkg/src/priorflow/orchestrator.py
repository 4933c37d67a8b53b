"""Episode loop: decision spaces, agent turns, weighted edges, pruning and learning."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from .agents.backends import AgentBackend
from .agents.protocol import AgentRequest, AgentResponse, format_marker, parse_next_node, render_prompt
from .core import (
    END,
    START,
    Action,
    DecisionSpace,
    EngineConfig,
    EpisodeTrace,
    Message,
    Outcome,
    RoleSet,
    State,
    TokenUsage,
    Via,
    WeightedEdge,
)
from .errors import AgentBackendFailure, EmptyActionSet, InvalidNextNode, NoMarkerFound, UnknownRole, UnknownRoleName
from .qlearn import QTable, decay_epsilon, decision_space, greedy_policy, td_update
from .reward import RoleStats, record_episode, step_reward, terminal_reward

log = logging.getLogger(__name__)

DEFAULT_SYSTEM_PROMPT = (
    "You are one member of a team of specialist agents.\n"
    "Already executed nodes: {prev_nodes}\n"
    "Available next nodes: {next_avail_nodes}"
)


@dataclass
class EpisodeContext:
    query: str
    episode_index: int = 0
    step: int = 0
    state: State = START
    executed: list[str] = field(default_factory=list)
    cumulative_reward: float = 0.0
    transcript: list[Message] = field(default_factory=list)
    edges: list[WeightedEdge] = field(default_factory=list)
    usage: TokenUsage = field(default_factory=TokenUsage)

    def add_edge(self, action: Action, reward: float, offered: DecisionSpace) -> None:
        self.edges.append(WeightedEdge(self.state, action, reward, len(self.edges), offered))
        self.cumulative_reward += reward


def available_actions(s: State, roles: RoleSet, executed: Sequence[str]) -> list[Action]:
    """Every role, plus END when ``s`` may terminate and someone has already run."""
    actions = [Action.goto(name) for name in roles]
    if executed and not s.is_start and roles[s.role].may_terminate:
        actions.append(END)
    return actions


def stop_reason(ctx: EpisodeContext, cfg: EngineConfig) -> Outcome | None:
    # A reward breach wins over the step ceiling so the episode is discarded.
    if ctx.cumulative_reward < cfg.prune_threshold:
        return Outcome.PRUNED
    if ctx.step >= cfg.max_steps:
        return Outcome.STEP_LIMIT
    return None


def should_prune(ctx: EpisodeContext, cfg: EngineConfig) -> bool:
    return stop_reason(ctx, cfg) is not None


def is_cold_start(episode_index: int, cfg: EngineConfig) -> bool:
    return episode_index < cfg.cold_start_episodes


def _start_choice(q: QTable, space: DecisionSpace, cold: bool, rng: random.Random) -> Action:
    # No agent has run yet, so the engine picks: uniformly during cold start,
    # the exploration candidate when one was drawn, greedy otherwise.
    if cold:
        return rng.choice(space.actions)
    explored = space.tagged(Via.EXPLORATION)
    if explored:
        return explored[0]
    return greedy_policy(q, START, space.actions)


def _agent_turn(
    backend: AgentBackend,
    request: AgentRequest,
    space: DecisionSpace,
    roles: RoleSet,
    timeout: float,
) -> tuple[AgentResponse, Action]:
    """Invoke the agent; retry once with a notice if it picks an unoffered node."""
    response = backend.invoke(request, timeout=timeout)
    try:
        return response, _checked_choice(response, space, roles)
    except (InvalidNextNode, NoMarkerFound, UnknownRoleName) as exc:
        notice = (
            f"Your previous reply was rejected: {exc}. "
            f"Choose exactly one of: {', '.join(space.names)} and end with {format_marker('<node>')}."
        )
        log.info("agent %s gave an invalid next node (%s); retrying once", request.role, exc)
    retry = AgentRequest(**{**request.__dict__, "retry_notice": notice})
    response2 = backend.invoke(retry, timeout=timeout)
    response2 = AgentResponse(response2.content, response2.next_node, response.usage + response2.usage)
    return response2, _checked_choice(response2, space, roles)


def _checked_choice(response: AgentResponse, space: DecisionSpace, roles: RoleSet) -> Action:
    action = response.next_node
    if action is None:
        action = parse_next_node(response.content, roles)
    if action not in space:
        raise InvalidNextNode(f"{action.name!r} is not among {space.names}")
    return action


def run_episode(
    query: str,
    roles: RoleSet,
    q: QTable,
    stats: RoleStats,
    cfg: EngineConfig,
    backend: AgentBackend,
    episode_index: int = 0,
    *,
    epsilon: float | None = None,
    rng: random.Random | None = None,
    system_prompt: str = DEFAULT_SYSTEM_PROMPT,
    task_id: str | None = None,
) -> tuple[EpisodeTrace, QTable, RoleStats]:
    """Run one query through the agent team and learn from it.

    ``q`` and ``stats`` are updated in place, and only when the episode ends
    in Success or StepLimit. Pruned and failed episodes leave both untouched.
    """
    if not roles:
        raise EmptyActionSet("role set is empty")
    missing = [name for name in roles if name not in stats]
    if missing:
        raise UnknownRole(f"role stats have no entry for {missing}; use RoleStats.for_roles")
    rng = rng if rng is not None else random.Random(0)
    epsilon = cfg.epsilon0 if epsilon is None else epsilon
    cold = is_cold_start(episode_index, cfg)
    ctx = EpisodeContext(query=query, episode_index=episode_index)
    outcome: Outcome | None = None

    while outcome is None:
        available = available_actions(ctx.state, roles, ctx.executed)
        space = decision_space(q, ctx.state, available, cfg.top_k, epsilon, cold, rng)

        if ctx.state.is_start:
            action = _start_choice(q, space, cold, rng)
        else:
            role = roles[ctx.state.role]
            request = render_prompt(
                system_prompt,
                prev_nodes=ctx.executed,
                next_avail=space.names,
                query=query,
                transcript=ctx.transcript,
                role_prompt=role.prompt,
                role=role.name,
                step=ctx.step - 1,
            )
            try:
                response, action = _agent_turn(backend, request, space, roles, cfg.agent_timeout)
            except (AgentBackendFailure, InvalidNextNode, NoMarkerFound, UnknownRoleName) as exc:
                log.warning("episode %d: agent %s failed: %s", episode_index, role.name, exc)
                outcome = Outcome.AGENT_ERROR
                break
            ctx.usage = ctx.usage + response.usage
            ctx.transcript.append(Message(role.name, response.content))

        if action.is_end:
            ctx.add_edge(action, terminal_reward(len(ctx.executed), cfg.reward), space)
            outcome = Outcome.SUCCESS
            break
        ctx.add_edge(action, step_reward(ctx.state, action, cfg.reward, stats, roles), space)
        ctx.executed.append(action.role)
        ctx.state = State(action.role)
        ctx.step += 1
        outcome = stop_reason(ctx, cfg)

    trace = EpisodeTrace(
        edges=tuple(ctx.edges),
        executed_roles=tuple(ctx.executed),
        cumulative_reward=ctx.cumulative_reward,
        outcome=outcome,
        transcript=tuple(ctx.transcript),
        query=query,
        episode_index=episode_index,
        usage=ctx.usage,
        task_id=task_id,
    )
    if outcome in (Outcome.SUCCESS, Outcome.STEP_LIMIT):
        learn_from_trace(q, trace, roles, cfg)
        record_episode(stats, trace)
    return trace, q, stats


def learn_from_trace(q: QTable, trace: EpisodeTrace, roles: RoleSet, cfg: EngineConfig) -> QTable:
    """Apply one TD update per edge, in path order."""
    for edge in trace.edges:
        if edge.target.is_end:
            td_update(q, edge.source, edge.target, edge.reward, None, cfg.alpha, cfg.gamma)
            continue
        s_next = State(edge.target.role)
        # Past the first edge someone has always executed, so END is open to terminators.
        nxt = available_actions(s_next, roles, (edge.target.role,))
        td_update(q, edge.source, edge.target, edge.reward, s_next, cfg.alpha, cfg.gamma, nxt)
    return q


class Engine:
    """Long-lived training state: Q-table, role statistics, epsilon schedule."""

    def __init__(
        self,
        roles: RoleSet,
        cfg: EngineConfig,
        backend: AgentBackend,
        *,
        q: QTable | None = None,
        stats: RoleStats | None = None,
        seed: int = 0,
        system_prompt: str = DEFAULT_SYSTEM_PROMPT,
    ):
        self.roles = roles
        self.cfg = cfg
        self.backend = backend
        self.q = q if q is not None else QTable(cfg.alpha, cfg.gamma)
        self.stats = stats if stats is not None else RoleStats.for_roles(roles)
        for name in roles:
            self.stats.n_execute.setdefault(name, 0)
            self.stats.n_success.setdefault(name, 0)
        self.rng = random.Random(seed)
        self.system_prompt = system_prompt
        self.epsilon = cfg.epsilon0
        self.episode_index = 0

    def run(self, query: str, task_id: str | None = None) -> EpisodeTrace:
        trace, _, _ = run_episode(
            query,
            self.roles,
            self.q,
            self.stats,
            self.cfg,
            self.backend,
            self.episode_index,
            epsilon=self.epsilon,
            rng=self.rng,
            system_prompt=self.system_prompt,
            task_id=task_id,
        )
        self.episode_index += 1
        self.epsilon = decay_epsilon(self.epsilon, self.cfg.epsilon_decay, self.cfg.epsilon_min)
        return trace


def check_trace(trace: EpisodeTrace, tol: float = 1e-9) -> None:
    """Assert the structural invariants every finished trace must satisfy."""
    assert math.isclose(trace.cumulative_reward, trace.recomputed_reward(), abs_tol=tol)
    prev: State | None = START
    for i, edge in enumerate(trace.edges):
        assert edge.step_index == i
        assert edge.source == prev, f"edge {i} leaves {edge.source}, expected {prev}"
        prev = None if edge.target.is_end else State(edge.target.role)
    ends_with_end = bool(trace.edges) and trace.edges[-1].target.is_end
    assert (trace.outcome is Outcome.SUCCESS) == ends_with_end
