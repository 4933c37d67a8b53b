"""Command-line entry point: ``priorflow {run,train,inspect,export,validate}``.

Exit codes: 0 on success, 1 on domain errors (bad config, pruned-only runs,
failed episodes), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from .agents.backends import AgentBackend
from .agents.cost import cost
from .agents.http import ChatCompletionBackend, LlmSettings
from .bench.sankey import export_sankey, write_sankey_csv
from .bench.scenario import load_scenario, run_scenario, write_report
from .config import load_settings, override_engine
from .core import EpisodeTrace, Outcome, State
from .errors import PriorFlowError
from .orchestrator import Engine
from .qlearn import QTable, load_qtable, save_qtable, top_k

log = logging.getLogger("priorflow")

# Swapped out in tests so `run` can be exercised without a live endpoint.
make_backend: Callable[[LlmSettings], AgentBackend] = ChatCompletionBackend


class UsageError(Exception):
    """Bad combination of otherwise well-formed flags."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priorflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", help="answer one query with a live chat-completion backend")
    p.add_argument("query", help="the user query")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--qtable", help="trained Q-table to start from (read only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, help="decision space size (overrides the config)")
    p.add_argument("--out", help="directory for the trace and updated Q-table")

    p = sub.add_parser("train", help="train on a scripted scenario")
    p.add_argument("--scenario", required=True, help="scenario YAML file or shipped scenario name")
    p.add_argument("--episodes", type=int, help="number of episodes (overrides the scenario)")
    p.add_argument("--seed", type=int, help="random seed (overrides the scenario)")
    p.add_argument("--k", type=int, help="decision space size (overrides the scenario)")
    p.add_argument("--out", help="report directory (default: runs/<scenario>)")
    p.add_argument("--qtable", help="where to write the trained Q-table (default: <out>/qtable.json)")

    p = sub.add_parser("inspect", help="print the top-k actions per state of a Q-table")
    p.add_argument("--qtable", required=True)
    p.add_argument("--state", help="only this state (a role name or START)")
    p.add_argument("--k", type=int, default=3)

    p = sub.add_parser("export", help="turn trace JSON files into Sankey CSV")
    p.add_argument("traces", nargs="+", help="trace files or directories of them")
    p.add_argument("--out", help="CSV file (default: stdout)")

    p = sub.add_parser("validate", help="check a configuration or scenario file")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--scenario", help="scenario YAML file or shipped scenario name")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {
        "run": cmd_run,
        "train": cmd_train,
        "inspect": cmd_inspect,
        "export": cmd_export,
        "validate": cmd_validate,
    }[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"priorflow: error: {exc}", file=sys.stderr)
        return 2
    except PriorFlowError as exc:
        print(f"priorflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _check_k(k: int | None) -> None:
    if k is not None and k < 1:
        raise UsageError("--k must be at least 1")


def cmd_run(args: argparse.Namespace) -> int:
    _check_k(args.k)
    settings = load_settings(args.config)
    cfg = override_engine(settings.engine, top_k=args.k)
    q = load_qtable(args.qtable) if args.qtable else None
    engine = Engine(
        settings.roles, cfg, make_backend(settings.llm), q=q, seed=args.seed, system_prompt=settings.system_prompt
    )
    if q is not None:
        # A trained table is past its cold start; offer top-k spaces right away.
        engine.episode_index = cfg.cold_start_episodes
    trace = engine.run(args.query)

    for msg in trace.transcript:
        print(f"--- {msg.role} ---")
        print(msg.content)
    print("---")
    print(_summary(trace))
    print(f"cost: ${cost(trace.usage, settings.llm.price_prompt, settings.llm.price_completion):.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.json").write_text(json.dumps(trace.to_dict(), indent=1))
        save_qtable(engine.q, out / "qtable.json")
    return 0 if trace.outcome is Outcome.SUCCESS else 1


def _summary(trace: EpisodeTrace) -> str:
    path = " -> ".join(["START", *trace.executed_roles, *(["END"] if trace.outcome is Outcome.SUCCESS else [])])
    return (
        f"outcome: {trace.outcome.value}\n"
        f"path: {path}\n"
        f"length: {trace.length}  reward: {trace.cumulative_reward:.3f}  "
        f"tokens: {trace.usage.prompt_tokens} prompt / {trace.usage.completion_tokens} completion"
    )


def cmd_train(args: argparse.Namespace) -> int:
    _check_k(args.k)
    if args.episodes is not None and args.episodes < 0:
        raise UsageError("--episodes must be >= 0")
    spec = load_scenario(args.scenario)
    changes = {}
    if args.episodes is not None:
        changes["episodes"] = args.episodes
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.k is not None:
        changes["engine"] = override_engine(spec.engine, top_k=args.k)
    if changes:
        spec = replace(spec, **changes)

    report = run_scenario(spec)
    out = Path(args.out or Path("runs") / spec.name)
    write_report(report, out)
    if args.qtable:
        save_qtable(report.qtable, args.qtable)
    outcomes = [row.outcome for row in report.episodes]
    print(f"scenario {spec.name}: {len(outcomes)} episodes, seed {spec.seed}")
    for outcome in Outcome:
        print(f"  {outcome.value}: {outcomes.count(outcome.value)}")
    print(f"pass rate: {report.pass_rate:.3f}")
    for difficulty, mean in report.mean_length_by_difficulty.items():
        print(f"mean length ({difficulty}): {mean:.2f}")
    print(f"total cost: ${report.total_cost:.6f}")
    print(f"report written to {out}")
    if outcomes and all(o == Outcome.PRUNED.value for o in outcomes):
        print("priorflow: every episode was pruned; nothing was learned", file=sys.stderr)
        return 1
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    _check_k(args.k)
    q = load_qtable(args.qtable)
    states = q.states()
    if args.state is not None:
        wanted = State.from_name(args.state)
        if wanted not in states:
            print(f"priorflow: state {args.state!r} has no entries in {args.qtable}", file=sys.stderr)
            return 1
        _print_top(q, wanted, args.k, indent="")
        return 0
    for s in states:
        print(s.name)
        _print_top(q, s, args.k, indent="  ")
    return 0


def _print_top(q: QTable, s: State, k: int, indent: str) -> None:
    for a in top_k(q, s, list(q.row(s)), k):
        print(f"{indent}{a.name}\t{q.get(s, a):.6f}")


def cmd_export(args: argparse.Namespace) -> int:
    files: list[Path] = []
    for name in args.traces:
        path = Path(name)
        if path.is_dir():
            files.extend(sorted(path.glob("*.json")))
        elif path.exists():
            files.append(path)
        else:
            raise UsageError(f"no such file or directory: {name}")
    traces = []
    for path in files:
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"priorflow: cannot read {path}: {exc}", file=sys.stderr)
            return 1
        traces.append(EpisodeTrace.from_dict(doc))
    flows = export_sankey(traces)
    if args.out:
        write_sankey_csv(flows, args.out)
    else:
        print("column,source,target,count")
        for f in flows:
            print(f"{f.column},{_csv_field(f.source)},{_csv_field(f.target)},{f.count}")
    return 0


def _csv_field(text: str) -> str:
    return f'"{text}"' if "," in text or '"' in text else text


def cmd_validate(args: argparse.Namespace) -> int:
    if not args.config and not args.scenario:
        raise UsageError("validate needs --config or --scenario")
    if args.config:
        settings = load_settings(args.config)
        terminators = ", ".join(settings.roles.terminators())
        print(f"{args.config}: ok ({len(settings.roles)} roles; may terminate: {terminators})")
    if args.scenario:
        spec = load_scenario(args.scenario)
        print(f"{args.scenario}: ok ({len(spec.roles)} roles, {spec.episodes} episodes, {len(spec.tasks)} tasks)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
