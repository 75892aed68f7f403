"""Loop-carried dependency extraction and pattern classification.

Each back edge in a graph defines one loop-carried dependency.  The
dependent path is the chain of intra-iteration operations that recomputes
the carried value, from the consumer node (where the previous iteration's
value enters) to the producer node (whose output travels on the back edge).
Dependencies are classified by how the rest of the loop body touches that
path, plus an orthogonal flag for memory traffic in the loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .ir import DataflowGraph, DfgError, Edge

DEFAULT_LATENCIES = {"alu": 1, "fpu": 4, "load": 20, "store": 1, "control": 1, "sju": 1}


class LoopPattern(enum.Enum):
    SINGLE_PATH = "SinglePath"
    DIVERGING_AFTER = "DivergingAfter"
    DIVERGING_BEFORE = "DivergingBefore"
    CONSECUTIVE = "Consecutive"


@dataclass(frozen=True)
class LoopCarriedDep:
    back_edge: Edge
    producer: int
    consumer: int
    consumer_slot: int
    diff: int
    dependent_path: tuple[int, ...]  # consumer first, producer last, intra edges only


def path_latency(g: DataflowGraph, path, latencies=None) -> int:
    lat = latencies or DEFAULT_LATENCIES
    return sum(lat[g.node(nid).latency_class] for nid in path)


def _all_intra_paths(g: DataflowGraph, start: int, goal: int):
    """All simple paths start -> goal over intra edges (DAG, so this is finite)."""
    if start == goal:
        yield (start,)
        return
    succ: dict[int, list[int]] = {}
    for e in g.intra_edges():
        succ.setdefault(e.src, []).append(e.dst)
    stack = [(start, (start,))]
    while stack:
        nid, path = stack.pop()
        for nxt in sorted(succ.get(nid, []), reverse=True):
            if nxt == goal:
                yield path + (nxt,)
            elif nxt not in path:
                stack.append((nxt, path + (nxt,)))


def find_deps(g: DataflowGraph, latencies=None) -> list[LoopCarriedDep]:
    """One dependency record per back edge, in declaration order.

    The dependent path is the intra-edge path consumer -> producer; when
    several exist the longest-latency one governs the stall cost and is
    chosen (ties: lexicographically smallest node sequence).
    """
    deps = []
    for be in g.back_edges():
        consumer, producer = be.dst, be.src
        best = None
        for path in _all_intra_paths(g, consumer, producer):
            cost = path_latency(g, path, latencies)
            cand = (-cost, path)
            if best is None or cand < best:
                best = cand
        if best is None:
            raise DfgError(
                "malformed-loop",
                f"back edge {producer}->{consumer}: consumer cannot reach producer",
            )
        deps.append(
            LoopCarriedDep(be, producer, consumer, be.slot, be.diff, best[1])
        )
    return deps


def classify(g: DataflowGraph, dep: LoopCarriedDep,
             deps: list[LoopCarriedDep] | None = None) -> tuple[LoopPattern, bool]:
    """Classify one dependency; returns (pattern, memory flag).

    The memory flag is orthogonal: true iff the loop body contains any
    load/store, regardless of the structural pattern.
    """
    if deps is None:
        deps = find_deps(g)
    mem = any(nd.kind in ("load", "store") for nd in g.nodes)

    mine = set(dep.dependent_path)
    for other in deps:
        if other.back_edge is dep.back_edge or other.back_edge == dep.back_edge:
            continue
        if mine & set(other.dependent_path):
            return LoopPattern.CONSECUTIVE, mem

    before = after = False
    for e in g.intra_edges():
        if e.src in mine and e.dst not in mine:
            if e.src == dep.producer:
                after = True
            else:
                before = True
    if before:
        return LoopPattern.DIVERGING_BEFORE, mem
    if after:
        return LoopPattern.DIVERGING_AFTER, mem
    return LoopPattern.SINGLE_PATH, mem


def describe_deps(g: DataflowGraph, latencies=None) -> list[str]:
    """One-line summaries used by the `analyze` CLI subcommand."""
    deps = find_deps(g, latencies)
    lines = []
    for dep in deps:
        pattern, mem = classify(g, dep, deps)
        cycles = path_latency(g, dep.dependent_path, latencies)
        lines.append(
            f"dep {dep.producer}->{dep.consumer} slot={dep.consumer_slot} "
            f"diff={dep.diff} pattern={pattern.value} mem={int(mem)} path_len={cycles}"
        )
    return lines
