import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from priorflow.agents.backends import PolicyBackend, ScriptedBackend
from priorflow.agents.protocol import AgentResponse
from priorflow.core import END, START, Action, EngineConfig, Outcome, RewardConfig, RoleSet, RoleSpec, State
from priorflow.errors import AgentBackendFailure, UnknownRole
from priorflow.orchestrator import (
    Engine,
    EpisodeContext,
    available_actions,
    check_trace,
    learn_from_trace,
    run_episode,
    stop_reason,
)
from priorflow.qlearn import QTable
from priorflow.reward import RoleStats

A, B = Action.goto("A"), Action.goto("B")


@pytest.fixture
def ab() -> RoleSet:
    return RoleSet([RoleSpec("A"), RoleSpec("B", may_terminate=True)])


def warm_cfg(**kw) -> EngineConfig:
    return EngineConfig(cold_start_episodes=0, epsilon0=0.0, epsilon_min=0.0, **kw)


def self_loop(request):
    return Action.goto(request.role)


def test_two_role_script(ab):
    q = QTable()
    q.set(START, A, 1.0)  # the engine opens with A
    stats = RoleStats.for_roles(ab)
    backend = ScriptedBackend([("plan", B), ("FINAL ANSWER\n/* next_node: END */",)])
    trace, q, stats = run_episode("task", ab, q, stats, warm_cfg(), backend, episode_index=0)

    assert trace.outcome is Outcome.SUCCESS
    assert [(e.source.name, e.target.name) for e in trace.edges] == [("START", "A"), ("A", "B"), ("B", "END")]
    assert [e.reward for e in trace.edges] == [-10.0, -10.0, 100.0]
    assert trace.cumulative_reward == 80.0
    check_trace(trace)
    # Path-order updates with alpha 0.1, gamma 0.9.
    assert q.get(START, A) == pytest.approx(0.9 * 1.0 + 0.1 * -10.0, abs=1e-12)
    assert q.get(State("A"), B) == pytest.approx(-1.0, abs=1e-12)
    assert q.get(State("B"), END) == pytest.approx(10.0, abs=1e-12)
    assert stats.n_execute == {"A": 1, "B": 1} and stats.n_success == {"A": 1, "B": 1}


def test_straight_line_closed_form():
    # n fresh roles in a row, rate 0: n * (-10) + 100.
    n = 5
    roles = RoleSet([RoleSpec(f"R{i}", may_terminate=(i == n - 1)) for i in range(n)])
    q = QTable()
    q.set(START, Action.goto("R0"), 1.0)
    script = [(f"step {i}", Action.goto(f"R{i + 1}")) for i in range(n - 1)] + [("done", END)]
    cfg = warm_cfg(top_k=n + 1)  # offer every node so the script is always legal
    trace, _, _ = run_episode("t", roles, q, RoleStats.for_roles(roles), cfg, ScriptedBackend(script))
    assert trace.outcome is Outcome.SUCCESS
    assert trace.cumulative_reward == n * -10 + 100


def test_self_loop_is_pruned_and_nothing_learned(ab):
    q, stats = QTable(), RoleStats.for_roles(ab)
    q.set(State("A"), A, 2.5)
    q_before, stats_before = q.copy(), stats.copy()
    trace, q_after, stats_after = run_episode(
        "t", ab, q, stats, EngineConfig(), PolicyBackend(self_loop), rng=random.Random(3)
    )
    assert trace.outcome is Outcome.PRUNED
    # -10 to enter, then -20 per repeat: -30, -50 (not yet below), -70.
    assert trace.cumulative_reward == -70.0
    assert trace.length == 4
    assert q_after == q_before and stats_after == stats_before


def test_step_limit_still_learns(ab):
    cfg = EngineConfig(max_steps=3, prune_threshold=-1000.0)
    q, stats = QTable(), RoleStats.for_roles(ab)
    trace, q, stats = run_episode("t", ab, q, stats, cfg, PolicyBackend(self_loop), rng=random.Random(0))
    assert trace.outcome is Outcome.STEP_LIMIT
    assert trace.length == 3
    assert len(q) > 0
    assert sum(stats.n_execute.values()) == 3 and sum(stats.n_success.values()) == 0


def test_stop_reason_boundaries():
    cfg = EngineConfig()
    assert stop_reason(EpisodeContext("q", cumulative_reward=-51.0), cfg) is Outcome.PRUNED
    assert stop_reason(EpisodeContext("q", cumulative_reward=-50.0), cfg) is None
    assert stop_reason(EpisodeContext("q", step=12), cfg) is Outcome.STEP_LIMIT
    assert stop_reason(EpisodeContext("q", step=12, cumulative_reward=-60.0), cfg) is Outcome.PRUNED


def test_available_actions():
    roles = RoleSet([RoleSpec("Programming Expert"), RoleSpec("Researcher"), RoleSpec("Test Engineer", may_terminate=True)])
    assert available_actions(START, roles, []) == [Action.goto(r) for r in roles]
    assert END in available_actions(State("Test Engineer"), roles, ["Programming Expert"])
    assert END not in available_actions(State("Researcher"), roles, ["Programming Expert"])
    assert END not in available_actions(State("Test Engineer"), roles, [])


class FlakyChooser:
    """First answer names an unoffered node; later answers are fine."""

    def __init__(self, first: str, then: str):
        self.calls = 0
        self.first, self.then = first, then

    def invoke(self, request, timeout=None):
        self.calls += 1
        if request.retry_notice is None:
            return AgentResponse(f"/* next_node: {self.first} */")
        assert "rejected" in request.retry_notice
        return AgentResponse(f"/* next_node: {self.then} */")


def test_invalid_next_node_is_retried_once(ab):
    q = QTable()
    q.set(START, B, 1.0)
    backend = FlakyChooser("Nobody", "END")
    trace, _, _ = run_episode("t", ab, q, RoleStats.for_roles(ab), warm_cfg(), backend)
    assert trace.outcome is Outcome.SUCCESS
    assert backend.calls == 2


def test_second_invalid_answer_ends_in_agent_error(ab):
    q = QTable()
    q.set(START, B, 1.0)
    before = q.copy()
    backend = FlakyChooser("Nobody", "Nobody either")
    trace, q, stats = run_episode("t", ab, q, RoleStats.for_roles(ab), warm_cfg(), backend)
    assert trace.outcome is Outcome.AGENT_ERROR
    assert q == before and sum(stats.n_execute.values()) == 0


def test_backend_failure_ends_in_agent_error(ab):
    def broken(request):
        raise AgentBackendFailure("down")

    trace, q, _ = run_episode("t", ab, QTable(), RoleStats.for_roles(ab), EngineConfig(), PolicyBackend(broken))
    assert trace.outcome is Outcome.AGENT_ERROR
    assert len(q) == 0


def test_missing_role_stats(ab):
    with pytest.raises(UnknownRole):
        run_episode("t", ab, QTable(), RoleStats.for_roles(["A"]), EngineConfig(), PolicyBackend(self_loop))


def test_engine_decays_epsilon_and_counts(ab):
    engine = Engine(ab, EngineConfig(), PolicyBackend(lambda r: END if r.role == "B" else B), seed=1)
    for _ in range(3):
        engine.run("t")
    assert engine.episode_index == 3
    assert engine.epsilon == pytest.approx(0.3 * 0.95**3)


def test_learn_from_trace_matches_engine(ab):
    q1 = QTable()
    q1.set(START, A, 1.0)
    q2 = q1.copy()
    backend = ScriptedBackend([("", B), ("", END)])
    trace, q1, _ = run_episode("t", ab, q1, RoleStats.for_roles(ab), warm_cfg(), backend)
    learn_from_trace(q2, trace, ab, warm_cfg())
    assert q1 == q2


roles_strategy = st.integers(2, 5).flatmap(
    lambda n: st.lists(st.booleans(), min_size=n, max_size=n).filter(any).map(
        lambda flags: RoleSet([RoleSpec(f"R{i}", may_terminate=f) for i, f in enumerate(flags)])
    )
)


@given(roles=roles_strategy, seed=st.integers(0, 10_000), episodes=st.integers(1, 40), k=st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_trace_invariants(roles, seed, episodes, k):
    world = random.Random(seed)
    backend = PolicyBackend(lambda r: Action.from_name(world.choice(r.next_avail)))
    cfg = EngineConfig(top_k=k, cold_start_episodes=5, max_steps=8)
    engine = Engine(roles, cfg, backend, seed=seed)
    for _ in range(episodes):
        before = (engine.q.copy(), engine.stats.copy())
        trace = engine.run("t")
        check_trace(trace)
        assert 1 <= trace.length <= cfg.max_steps
        assert math.isfinite(trace.cumulative_reward)
        for edge in trace.edges:
            assert edge.target in edge.offered
            if edge.target.is_end:
                assert roles[edge.source.role].may_terminate and edge.step_index > 0
        if trace.outcome in (Outcome.PRUNED, Outcome.AGENT_ERROR):
            assert (engine.q, engine.stats) == before
        else:
            assert sum(engine.stats.n_execute.values()) == sum(before[1].n_execute.values()) + trace.length
        for name in roles:
            assert engine.stats.n_success[name] <= engine.stats.n_execute[name]


def test_same_seed_same_run(ab):
    def make():
        world = random.Random(9)
        return Engine(ab, EngineConfig(cold_start_episodes=3), PolicyBackend(
            lambda r: Action.from_name(world.choice(r.next_avail))), seed=4)

    e1, e2 = make(), make()
    t1 = [e1.run("t").to_dict() for _ in range(10)]
    t2 = [e2.run("t").to_dict() for _ in range(10)]
    assert t1 == t2 and e1.q == e2.q
