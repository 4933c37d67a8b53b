"""Property tests for the invariants that span modules."""

import math
import random
from collections import Counter

from hypothesis import assume, given, settings
from hypothesis import strategies as st

from priorflow.agents.backends import PolicyBackend
from priorflow.bench import ExplicitMDP, export_sankey, greedy_from, role_mdp, run_scenario, value_iteration_oracle
from priorflow.bench.scenario import ScenarioSpec
from priorflow.bench.worlds import Task, WorldSpec
from priorflow.core import END, Action, EngineConfig, EpisodeTrace, RewardConfig, RoleSet, RoleSpec, State
from priorflow.orchestrator import Engine
from priorflow.qlearn import QTable, greedy_policy, td_update
from priorflow.reward import RoleStats, step_reward

finite = st.floats(-1e4, 1e4, allow_nan=False)


@given(q0=finite, r=finite, nxt=finite, alpha=st.floats(0.01, 0.99), gamma=st.floats(0, 0.99))
def test_update_shrinks_distance_to_target_exactly(q0, r, nxt, alpha, gamma):
    s, s2, a = State("A"), State("B"), Action.goto("B")
    q = QTable()
    q.set(s, a, q0)
    q.set(s2, Action.goto("A"), nxt)
    target = r + gamma * nxt
    td_update(q, s, a, r, s2, alpha, gamma)
    assert math.isclose(abs(q.get(s, a) - target), (1 - alpha) * abs(q0 - target), rel_tol=1e-9, abs_tol=1e-7)


@st.composite
def small_mdps(draw):
    n = draw(st.integers(1, 4))
    names = [f"R{i}" for i in range(n)]
    terminators = draw(st.lists(st.booleans(), min_size=n, max_size=n).filter(any))
    actions, transitions = {}, {}
    reward = st.floats(-20, 0, allow_nan=False)
    for name, can_stop in zip(names, terminators):
        acts = list(names) + (["END"] if can_stop else [])
        actions[name] = tuple(acts)
        for a in acts:
            if a == "END":
                transitions[(name, a)] = (None, draw(st.floats(0, 100, allow_nan=False)))
            else:
                transitions[(name, a)] = (a, draw(reward))
    return ExplicitMDP(actions, transitions, draw(st.floats(0.5, 0.95)))


@given(small_mdps())
@settings(max_examples=40, deadline=None)
def test_sweeps_converge_to_the_oracle(mdp):
    q = QTable()
    succ = {s: [Action.from_name(a) for a in acts] for s, acts in mdp.actions.items()}
    for _ in range(10_000):
        delta = 0.0
        for (s, a), (nxt, r) in mdp.transitions.items():
            before = q.get(State(s), Action.from_name(a))
            if nxt is None:
                td_update(q, State(s), Action.from_name(a), r, None, 0.5, mdp.gamma)
            else:
                td_update(q, State(s), Action.from_name(a), r, State(nxt), 0.5, mdp.gamma, succ[nxt])
            delta = max(delta, abs(q.get(State(s), Action.from_name(a)) - before))
        if delta < 1e-6:
            break
    assert delta < 1e-6
    q_star = value_iteration_oracle(mdp)
    for s, acts in mdp.actions.items():
        values = sorted((q_star[(s, a)] for a in acts), reverse=True)
        assume(len(values) == 1 or values[0] - values[1] > 1e-4)
    learned = {s: greedy_policy(q, State(s), succ[s]).name for s in mdp.actions}
    assert learned == greedy_from(q_star, mdp)


ROLES = RoleSet([RoleSpec("A"), RoleSpec("B", may_terminate=True, cost=1.5)])


@given(st.integers(0, 30), st.integers(0, 30), st.integers(1, 30), st.sampled_from(["A", "B"]))
def test_step_reward_monotone_in_success_rate(k1, k2, n, role):
    lo, hi = sorted((min(k1, n), min(k2, n)))
    assume(lo < hi)
    rewards = []
    for k in (lo, hi):
        stats = RoleStats.for_roles(ROLES)
        stats.n_execute[role], stats.n_success[role] = n, k
        rewards.append(step_reward(State("A"), Action.goto(role), RewardConfig(), stats, ROLES))
    assert rewards[0] < rewards[1] < 0


@given(st.integers(0, 30), st.integers(0, 30), st.sampled_from(["A", "B"]))
def test_repeat_costs_exactly_the_repeat_penalty(k, extra, role):
    stats = RoleStats.for_roles(ROLES)
    stats.n_execute[role], stats.n_success[role] = k + extra, k
    other = "B" if role == "A" else "A"
    fresh = step_reward(State(other), Action.goto(role), RewardConfig(), stats, ROLES)
    repeat = step_reward(State(role), Action.goto(role), RewardConfig(), stats, ROLES)
    assert repeat == fresh - 10.0


def random_engine(seed: int, roles: RoleSet, **cfg) -> Engine:
    world = random.Random(seed)
    backend = PolicyBackend(lambda r: Action.from_name(world.choice(r.next_avail)))
    return Engine(roles, EngineConfig(**cfg), backend, seed=seed)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_traces_round_trip_and_sankey_conserves(seed):
    roles = RoleSet([RoleSpec("A"), RoleSpec("B"), RoleSpec("C", may_terminate=True)])
    engine = random_engine(seed, roles, cold_start_episodes=3, max_steps=6)
    traces = [engine.run(f"q{i}") for i in range(15)]
    for t in traces:
        assert EpisodeTrace.from_dict(t.to_dict()) == t
        assert abs(t.recomputed_reward() - t.cumulative_reward) <= 1e-9

    flows = export_sankey(traces)
    assert sum(f.count for f in flows if f.column == 0) == len(traces)
    inflow, outflow = Counter(), Counter()
    for f in flows:
        inflow[(f.column + 1, f.target)] += f.count
        outflow[(f.column, f.source)] += f.count
    for (column, node), n in inflow.items():
        if node in roles:
            assert outflow[(column, node)] == n


@given(st.lists(st.sampled_from([1.0, 1.3, 1.7, 2.2]), min_size=2, max_size=3), st.integers(0, 3))
@settings(max_examples=4, deadline=None)
def test_trained_policy_matches_oracle(costs, stopper):
    roles = RoleSet([RoleSpec(f"R{i}", may_terminate=(i == stopper % len(costs)), cost=c) for i, c in enumerate(costs)])
    episodes = 1500
    engine = EngineConfig(
        cold_start_episodes=episodes, prune_threshold=-1e6,
        reward=RewardConfig(success_rate_scale=0.0, min_path_len=1),
    )
    spec = ScenarioSpec("prop", roles, WorldSpec(kind="random"), (Task("walk"),), episodes, seed=1, engine=engine)
    report = run_scenario(spec)
    mdp = role_mdp(roles, engine.reward, engine.gamma)
    q_star = value_iteration_oracle(mdp)
    for s, acts in mdp.actions.items():
        values = sorted((q_star[(s, a)] for a in acts), reverse=True)
        assume(len(values) == 1 or values[0] - values[1] > 1e-3)
    learned = {
        s: greedy_policy(report.qtable, State.from_name(s), [Action.from_name(a) for a in acts]).name
        for s, acts in mdp.actions.items()
    }
    assert learned == greedy_from(q_star, mdp)
    assert max(abs(report.qtable.get(State.from_name(s), Action.from_name(a)) - v) for (s, a), v in q_star.items()) < 1e-3
