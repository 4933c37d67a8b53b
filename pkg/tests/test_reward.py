import pytest
from hypothesis import given
from hypothesis import strategies as st

from priorflow.core import END, START, Action, EpisodeTrace, Outcome, RewardConfig, RoleSet, RoleSpec, State
from priorflow.errors import UnknownRole
from priorflow.reward import RoleStats, component_reward, record_episode, step_reward, success_rate, terminal_reward

CFG = RewardConfig()
ROLES = RoleSet([RoleSpec("A"), RoleSpec("B", may_terminate=True), RoleSpec("Heavy", cost=2.0)])


def stats_with(role: str, n_success: int, n_execute: int) -> RoleStats:
    stats = RoleStats.for_roles(ROLES)
    stats.n_execute[role] = n_execute
    stats.n_success[role] = n_success
    return stats


def test_component_magnitudes():
    assert component_reward(5, 2) == 10
    assert component_reward(10, 1) == 10
    assert component_reward(0, 7) == 0


def test_success_rate():
    assert success_rate(stats_with("A", 3, 4), "A") == 0.75
    assert success_rate(stats_with("A", 0, 0), "A") == 0.0
    assert success_rate(stats_with("A", 5, 5), "A") == 1.0
    with pytest.raises(UnknownRole):
        success_rate(RoleStats.for_roles(ROLES), "Ghost")


def test_step_reward_fresh_role():
    assert step_reward(State("A"), Action.goto("B"), CFG, RoleStats.for_roles(ROLES), ROLES) == -10.0


def test_step_reward_repeat_and_rate():
    stats = stats_with("A", 1, 2)
    # -10 + 5 * 0.5 - 10 for handing control back to itself
    assert step_reward(State("A"), Action.goto("A"), CFG, stats, ROLES) == -17.5


def test_step_reward_cost_weight():
    assert step_reward(START, Action.goto("Heavy"), CFG, RoleStats.for_roles(ROLES), ROLES) == -20.0


def test_step_reward_rejects_end_and_unknown():
    with pytest.raises(ValueError):
        step_reward(State("B"), END, CFG, RoleStats.for_roles(ROLES), ROLES)
    with pytest.raises(UnknownRole):
        step_reward(State("B"), Action.goto("Ghost"), CFG, RoleStats.for_roles(ROLES), ROLES)


def test_terminal_reward():
    assert terminal_reward(5, CFG) == 100
    assert terminal_reward(1, CFG) == 90
    assert terminal_reward(0, RewardConfig(min_path_len=0)) == 100


def _trace(roles, outcome):
    return EpisodeTrace((), tuple(roles), 0.0, outcome)


def test_record_episode():
    stats = RoleStats.for_roles(ROLES)
    record_episode(stats, _trace(["A", "B"], Outcome.SUCCESS))
    assert stats.n_execute["A"] == stats.n_execute["B"] == 1
    assert stats.n_success["A"] == stats.n_success["B"] == 1

    stats = RoleStats.for_roles(ROLES)
    record_episode(stats, _trace(["A", "A", "B"], Outcome.PRUNED))
    assert (stats.n_execute["A"], stats.n_execute["B"]) == (2, 1)
    assert sum(stats.n_success.values()) == 0

    stats = RoleStats.for_roles(ROLES)
    before = stats.copy()
    record_episode(stats, _trace([], Outcome.STEP_LIMIT))
    assert stats == before


def test_stats_round_trip():
    stats = stats_with("A", 2, 3)
    assert RoleStats.from_dict(stats.to_dict()) == stats


@given(
    n_ok=st.integers(0, 50),
    extra=st.integers(0, 50),
    role=st.sampled_from(["A", "B"]),
    source=st.sampled_from(["START", "A", "B"]),
)
def test_hand_off_is_always_negative(n_ok, extra, role, source):
    stats = stats_with(role, n_ok, n_ok + extra)
    rate = success_rate(stats, role)
    assert 0.0 <= rate <= 1.0
    assert 0.0 <= CFG.success_rate_scale * rate <= 5.0
    r = step_reward(State.from_name(source), Action.goto(role), CFG, stats, ROLES)
    assert r < 0
    assert r < CFG.success_rate_scale


@given(st.integers(0, 100), st.integers(0, 10))
def test_terminal_reward_bounds(path_len, min_len):
    cfg = RewardConfig(min_path_len=min_len)
    r = terminal_reward(path_len, cfg)
    assert r <= 100
    assert (r == 100) == (path_len >= min_len)
