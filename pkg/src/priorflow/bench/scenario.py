"""Scenario files, training runs and run reports."""

from __future__ import annotations

import csv
import json
import os
import statistics
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..agents.cost import cost
from ..config import check_template, load_library
from ..core import EngineConfig, EpisodeTrace, Outcome, RoleSet, RoleSpec, State, validate_role_set
from ..errors import ConfigError, ScenarioInvalid
from ..orchestrator import Engine, available_actions
from ..qlearn import QTable, qtable_to_dict
from ..reward import RoleStats, success_rate
from .worlds import Task, WorldSpec

SCENARIO_KEYS = {
    "name", "episodes", "seed", "role_library", "roles", "system_prompt",
    "engine", "prices", "world", "tasks",
}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    roles: RoleSet
    world: WorldSpec
    tasks: tuple[Task, ...]
    episodes: int
    seed: int = 0
    engine: EngineConfig = field(default_factory=EngineConfig)
    price_prompt: float = 0.0
    price_completion: float = 0.0
    system_prompt: str = ""

    @property
    def task_mix(self) -> list[tuple[str, str]]:
        return [(t.id, t.difficulty) for t in self.tasks]

    def task_for(self, episode: int) -> Task:
        return self.tasks[episode % len(self.tasks)]


def scenario_from_dict(doc: Mapping[str, Any]) -> ScenarioSpec:
    if not isinstance(doc, Mapping):
        raise ScenarioInvalid("scenario must be a mapping")
    unknown = set(doc) - SCENARIO_KEYS
    if unknown:
        raise ScenarioInvalid(f"unknown scenario key(s) {sorted(unknown)}")
    try:
        library = load_library(doc.get("role_library", "code"))
        roles = library.roles
        if "roles" in doc:
            roles = validate_role_set([RoleSpec.from_dict(r) for r in doc["roles"]])
        system_prompt = doc.get("system_prompt", library.system_prompt)
        check_template(system_prompt)
        engine = EngineConfig.from_dict(doc.get("engine") or {})
        engine.reward.check_roles(roles)
        world = WorldSpec.from_dict(doc.get("world") or {})
        prices = doc.get("prices") or {}
        if set(prices) - {"prompt", "completion"}:
            raise ScenarioInvalid(f"prices: unknown key(s) {sorted(set(prices) - {'prompt', 'completion'})}")
    except ConfigError as exc:
        raise ScenarioInvalid(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioInvalid(str(exc)) from exc

    tasks = []
    raw_tasks = doc["tasks"] if "tasks" in doc else [{"id": "task-0", "difficulty": "easy"}]
    if not isinstance(raw_tasks, list):
        raise ScenarioInvalid("tasks must be a list")
    for i, t in enumerate(raw_tasks):
        if not isinstance(t, Mapping) or set(t) - {"id", "difficulty", "repairs"}:
            raise ScenarioInvalid(f"task {i}: expected keys id, difficulty, repairs")
        difficulty = str(t.get("difficulty", "easy"))
        if "repairs" in t:
            repairs = int(t["repairs"])
        elif difficulty in world.difficulties:
            repairs = int(world.difficulties[difficulty])
        else:
            raise ScenarioInvalid(f"task {i}: no repair count for difficulty {difficulty!r}")
        tasks.append(Task(str(t.get("id", f"task-{i}")), difficulty, repairs))

    episodes = int(doc.get("episodes", 0))
    if episodes < 0:
        raise ScenarioInvalid("episodes must be >= 0")
    spec = ScenarioSpec(
        name=str(doc.get("name", "scenario")),
        roles=roles,
        world=world,
        tasks=tuple(tasks),
        episodes=episodes,
        seed=int(doc.get("seed", 0)),
        engine=engine,
        price_prompt=float(prices.get("prompt", 0.0)),
        price_completion=float(prices.get("completion", 0.0)),
        system_prompt=system_prompt,
    )
    validate_scenario(spec)
    return spec


def validate_scenario(spec: ScenarioSpec) -> None:
    if not spec.tasks:
        raise ScenarioInvalid("scenario needs at least one task")
    spec.world.build(spec.roles, spec.seed)


def shipped_scenarios() -> list[str]:
    root = resources.files("priorflow.data.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(source: str | os.PathLike[str]) -> ScenarioSpec:
    """Load a scenario from a YAML file, or a shipped scenario by name."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    elif str(source) in shipped_scenarios():
        text = resources.files("priorflow.data.scenarios").joinpath(f"{source}.yaml").read_text()
    else:
        raise ScenarioInvalid(f"no scenario file or shipped scenario named {str(source)!r}")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioInvalid(f"invalid YAML: {exc}") from exc
    return scenario_from_dict(doc)


@dataclass
class EpisodeRow:
    episode: int
    task_id: str
    difficulty: str
    outcome: str
    length: int
    cumulative_reward: float
    cost: float
    prompt_tokens: int
    completion_tokens: int


@dataclass
class RunReport:
    scenario: str
    episodes: list[EpisodeRow]
    q_values: dict[str, dict[str, float]]
    success_rates: dict[str, float]
    pass_rate: float
    pass_rate_defined: bool
    mean_length_by_difficulty: dict[str, float]
    total_cost: float
    # Not part of the serialized report; kept for callers that want to dig in.
    traces: list[EpisodeTrace] = field(default_factory=list, repr=False)
    qtable: QTable | None = field(default=None, repr=False)
    stats: RoleStats | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "pass_rate": self.pass_rate,
            "pass_rate_defined": self.pass_rate_defined,
            "mean_length_by_difficulty": self.mean_length_by_difficulty,
            "total_cost": self.total_cost,
            "success_rates": self.success_rates,
            "q_values": self.q_values,
            "episodes": [row.__dict__ for row in self.episodes],
        }


def run_scenario(spec: ScenarioSpec, cfg: EngineConfig | None = None) -> RunReport:
    """Train on ``spec`` with its scripted world; fully determined by ``spec.seed``."""
    cfg = cfg or spec.engine
    world = spec.world.build(spec.roles, spec.seed)
    engine = Engine(
        spec.roles, cfg, world.backend(), seed=spec.seed, system_prompt=spec.system_prompt or _fallback_prompt()
    )
    rows: list[EpisodeRow] = []
    traces: list[EpisodeTrace] = []
    for i in range(spec.episodes):
        task = spec.task_for(i)
        world.begin(task)
        trace = engine.run(f"[{task.difficulty}] {task.id}", task_id=task.id)
        traces.append(trace)
        rows.append(
            EpisodeRow(
                episode=i,
                task_id=task.id,
                difficulty=task.difficulty,
                outcome=trace.outcome.value,
                length=trace.length,
                cumulative_reward=trace.cumulative_reward,
                cost=cost(trace.usage, spec.price_prompt, spec.price_completion),
                prompt_tokens=trace.usage.prompt_tokens,
                completion_tokens=trace.usage.completion_tokens,
            )
        )

    successes = sum(r.outcome == Outcome.SUCCESS.value for r in rows)
    trained = [r for r in rows if r.episode >= cfg.cold_start_episodes] or rows
    by_diff: dict[str, list[int]] = {}
    for r in trained:
        by_diff.setdefault(r.difficulty, []).append(r.length)
    return RunReport(
        scenario=spec.name,
        episodes=rows,
        q_values=q_value_table(engine.q, spec.roles),
        success_rates={name: success_rate(engine.stats, name) for name in spec.roles},
        pass_rate=successes / len(rows) if rows else 0.0,
        pass_rate_defined=bool(rows),
        mean_length_by_difficulty={d: statistics.fmean(v) for d, v in sorted(by_diff.items())},
        total_cost=sum(r.cost for r in rows),
        traces=traces,
        qtable=engine.q,
        stats=engine.stats,
    )


def _fallback_prompt() -> str:
    return load_library("code").system_prompt


def q_value_table(q: QTable, roles: RoleSet) -> dict[str, dict[str, float]]:
    """Q-values of every available action from START and every role."""
    table = {}
    for s in [State(), *(State(r) for r in roles)]:
        acts = available_actions(s, roles, [] if s.is_start else [s.role])
        table[s.name] = {a.name: q.get(s, a) for a in acts}
    return table


def write_report(report: RunReport, out_dir: str | os.PathLike[str], traces: bool = True) -> Path:
    """Write report.json, episodes.csv, roles.csv, qtable.json, sankey.csv and per-episode traces."""
    from .sankey import export_sankey, write_sankey_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    with open(out / "episodes.csv", "w", newline="") as fh:
        fields = list(EpisodeRow.__dataclass_fields__)
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in report.episodes:
            writer.writerow(row.__dict__)
    with open(out / "roles.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["role", "n_execute", "n_success", "success_rate"])
        for name, rate in report.success_rates.items():
            n_ex = report.stats.n_execute.get(name, 0) if report.stats else 0
            n_ok = report.stats.n_success.get(name, 0) if report.stats else 0
            writer.writerow([name, n_ex, n_ok, rate])
    if report.qtable is not None:
        (out / "qtable.json").write_text(json.dumps(qtable_to_dict(report.qtable), indent=2) + "\n")
    if traces and report.traces:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
        for t in report.traces:
            (trace_dir / f"episode_{t.episode_index:05d}.json").write_text(json.dumps(t.to_dict(), indent=1))
        write_sankey_csv(export_sankey(report.traces), out / "sankey.csv")
    return out
