"""Scripted agent teams whose task success depends only on the visited roles."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..agents.backends import PolicyBackend
from ..agents.protocol import AgentRequest
from ..core import END, Action, RoleSet
from ..errors import ScenarioInvalid


@dataclass(frozen=True)
class Task:
    id: str
    difficulty: str = "easy"
    repairs: int = 0


class World:
    """Base class: a scripted team bound to one task at a time."""

    def __init__(self, roles: RoleSet, seed: int | str = 0):
        self.roles = roles
        self.rng = random.Random(f"world-{seed}")
        self.task = Task("task-0")

    def begin(self, task: Task) -> None:
        self.task = task

    def decide(self, request: AgentRequest) -> Action:
        raise NotImplementedError

    def backend(self) -> PolicyBackend:
        return PolicyBackend(self.decide)


class RandomWalkWorld(World):
    """Every agent picks uniformly among the nodes it is offered."""

    def decide(self, request: AgentRequest) -> Action:
        return Action.from_name(self.rng.choice(request.next_avail))


class PipelineWorld(World):
    """A team that knows the intended order of work.

    Each role hands off to the next role in ``pipeline``. The last pipeline
    role checks the work: it ends the workflow once the task passes, and sends
    the work back to ``repair_role`` otherwise. A task with ``repairs = n``
    passes on the checker's (n+1)-th visit, provided every ``required`` role
    (default: the whole pipeline) has run and the traitor never has. The traitor keeps the work to itself
    whenever it can. With probability ``noise`` an agent picks a random
    non-END node instead, and with probability ``traitor_lure`` an honest
    agent is talked into handing off to the traitor when it is offered.
    """

    def __init__(
        self,
        roles: RoleSet,
        pipeline: Sequence[str],
        repair_role: str | None = None,
        traitor: str | None = None,
        noise: float = 0.0,
        traitor_lure: float = 0.0,
        seed: int | str = 0,
        required: Sequence[str] | None = None,
    ):
        super().__init__(roles, seed)
        if len(pipeline) < 1:
            raise ScenarioInvalid("pipeline must name at least one role")
        required = list(pipeline if required is None else required)
        for name in [*pipeline, *required, repair_role, traitor]:
            if name is not None and name not in roles:
                raise ScenarioInvalid(f"world refers to unknown role {name!r}")
        if not roles[pipeline[-1]].may_terminate:
            raise ScenarioInvalid(f"checker {pipeline[-1]!r} must have may_terminate")
        if traitor is not None and (traitor in pipeline or traitor in required):
            raise ScenarioInvalid("the traitor cannot be part of the pipeline")
        self.pipeline = list(pipeline)
        self.required = required
        self.checker = pipeline[-1]
        self.repair_role = repair_role or pipeline[max(0, len(pipeline) - 2)]
        self.traitor = traitor
        self.noise = noise
        self.traitor_lure = traitor_lure

    def passes(self, visited: Sequence[str]) -> bool:
        if self.traitor is not None and self.traitor in visited:
            return False
        if any(p not in visited for p in self.required):
            return False
        return visited.count(self.checker) > self.task.repairs

    def preferred(self, visited: Sequence[str]) -> Action:
        me = visited[-1]
        missing = [p for p in self.required if p not in visited]
        if me == self.checker:
            if self.passes(visited):
                return END
            return Action.goto(missing[0] if missing else self.repair_role)
        if me in self.pipeline:
            i = self.pipeline.index(me)
            return Action.goto(self.pipeline[i + 1])
        return Action.goto(missing[0] if missing else self.checker)

    def decide(self, request: AgentRequest) -> Action:
        visited = list(request.prev_nodes)
        me = request.role
        offered = [Action.from_name(n) for n in request.next_avail]
        handoffs = [a for a in offered if not a.is_end]
        # Draw every coin up front so the random stream does not depend on the branch.
        lured = self.rng.random() < self.traitor_lure
        noisy = self.rng.random() < self.noise
        pick = self.rng.choice(handoffs) if handoffs else None

        if me == self.traitor:
            self_action = Action.goto(me)
            if self_action in offered:
                return self_action
            return pick if pick is not None else offered[0]
        traitor_action = Action.goto(self.traitor) if self.traitor else None
        if lured and traitor_action in offered:
            return traitor_action
        if noisy and pick is not None:
            return pick
        want = self.preferred(visited)
        if want in offered:
            return want
        return self.fallback(visited, offered)

    def fallback(self, visited: Sequence[str], offered: Sequence[Action]) -> Action:
        """Best offered substitute when the preferred node is not on offer."""
        me = visited[-1]
        wanted = [p for p in self.required if p not in visited]
        wanted += [self.repair_role, self.checker]
        wanted += [p for p in self.pipeline if p != me]
        for name in wanted:
            if name != me and Action.goto(name) in offered:
                return Action.goto(name)
        handoffs = [a for a in offered if not a.is_end and a.role != self.traitor]
        return (handoffs or [a for a in offered if not a.is_end] or list(offered))[0]


@dataclass(frozen=True)
class WorldSpec:
    kind: str = "pipeline"
    pipeline: tuple[str, ...] = ()
    required: tuple[str, ...] | None = None
    repair_role: str | None = None
    traitor: str | None = None
    noise: float = 0.0
    traitor_lure: float = 0.0
    difficulties: Mapping[str, int] = field(default_factory=lambda: {"easy": 0, "hard": 2})

    KEYS = ("kind", "pipeline", "required", "repair_role", "traitor", "noise", "traitor_lure", "difficulties")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WorldSpec":
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ScenarioInvalid(f"world: unknown key(s) {sorted(unknown)}")
        kw = dict(data)
        for key in ("pipeline", "required"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        if kw.get("kind", "pipeline") not in ("pipeline", "random"):
            raise ScenarioInvalid(f"world.kind must be 'pipeline' or 'random', got {kw['kind']!r}")
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        d = {k: getattr(self, k) for k in self.KEYS}
        d["pipeline"] = list(self.pipeline)
        d["required"] = None if self.required is None else list(self.required)
        d["difficulties"] = dict(self.difficulties)
        return d

    def build(self, roles: RoleSet, seed: int | str) -> World:
        if self.kind == "random":
            return RandomWalkWorld(roles, seed)
        return PipelineWorld(
            roles,
            self.pipeline,
            repair_role=self.repair_role,
            traitor=self.traitor,
            noise=self.noise,
            traitor_lure=self.traitor_lure,
            seed=seed,
            required=self.required,
        )

