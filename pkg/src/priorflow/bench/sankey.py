"""Flow triples for Sankey plots of traversed workflows."""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..core import END_NAME, EpisodeTrace
from ..errors import EmptyInput


@dataclass(frozen=True, order=True)
class Flow:
    column: int
    source: str
    target: str
    count: int


def trace_nodes(trace: EpisodeTrace) -> list[str]:
    """Executed roles followed by the terminal label (END, or the outcome name)."""
    ended = bool(trace.edges) and trace.edges[-1].target.is_end
    return [*trace.executed_roles, END_NAME if ended else trace.outcome.value]


def export_sankey(traces: Sequence[EpisodeTrace]) -> list[Flow]:
    """Count (source, target) hand-offs per step column.

    Column ``j`` holds the j-th hand-off of every trace that got that far, so
    its counts sum to the number of traces still running at that column.
    """
    if not traces:
        raise EmptyInput("no traces to export")
    counts: Counter[tuple[int, str, str]] = Counter()
    for trace in traces:
        nodes = trace_nodes(trace)
        for j in range(len(nodes) - 1):
            counts[(j, nodes[j], nodes[j + 1])] += 1
    return sorted(Flow(c, s, t, n) for (c, s, t), n in counts.items())


def write_sankey_csv(flows: Sequence[Flow], path: str | os.PathLike[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "source", "target", "count"])
        for f in flows:
            writer.writerow([f.column, f.source, f.target, f.count])
