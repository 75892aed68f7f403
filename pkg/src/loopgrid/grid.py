"""Placement and static routing of a dataflow graph onto a heterogeneous grid.

The grid is a rows x cols array of cells, each hosting at most one node of a
matching unit class.  Edges become fixed routes charged pure manhattan hop
latency (the interconnect is contention-free by design).  Loop-carried back
edges are realized in-grid by a retagging feedback attachment on the
producer unit: the producer's result, with its thread id bumped by the
dependency's diff, is written into the consumer's dependent input slot.  A
selector on that slot serves externally supplied initial values for the
first ``diff`` threads and feedback values from then on.  When producer and
consumer are different units (including every diverging-before dependency)
an end-of-route update node re-broadcasts the final value back to the
consumer, paying its route latency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .analysis import DEFAULT_LATENCIES, LoopCarriedDep, LoopPattern, classify, find_deps
from .ir import DataflowGraph, topo_order

COMPUTE, LDST, CONTROL, SJU = "COMPUTE", "LDST", "CONTROL", "SJU"

# node kind -> unit class hosting it
KIND_CLASS = {"load": LDST, "store": LDST, "control": CONTROL, "splitjoin": SJU}


def kind_class(kind: str) -> str:
    return KIND_CLASS.get(kind, COMPUTE)


class MapError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


@dataclass
class GridSpec:
    rows: int = 8
    cols: int = 8
    unit_map: dict[tuple[int, int], str] = field(default_factory=dict)
    latencies: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_LATENCIES))
    hop_latency: int = 1
    token_buffer_depth: int = 16

    def cells_of(self, cls: str) -> list[tuple[int, int]]:
        return sorted(c for c, k in self.unit_map.items() if k == cls)

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "unit_map": {f"{r},{c}": k for (r, c), k in sorted(self.unit_map.items())},
            "latencies": self.latencies,
            "hop_latency": self.hop_latency,
            "token_buffer_depth": self.token_buffer_depth,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GridSpec":
        unit_map = {}
        for key, k in doc.get("unit_map", {}).items():
            r, c = key.split(",")
            unit_map[(int(r), int(c))] = k
        spec = cls(
            rows=doc.get("rows", 8),
            cols=doc.get("cols", 8),
            unit_map=unit_map,
            hop_latency=doc.get("hop_latency", 1),
            token_buffer_depth=doc.get("token_buffer_depth", 16),
        )
        spec.latencies.update(doc.get("latencies", {}))
        return spec


def default_grid() -> GridSpec:
    """8x8 grid: columns 0-1 load/store, column 2 control and split/join
    interleaved by row, columns 3-7 compute."""
    unit_map = {}
    for r in range(8):
        for c in range(8):
            if c < 2:
                unit_map[(r, c)] = LDST
            elif c == 2:
                unit_map[(r, c)] = CONTROL if r % 2 == 0 else SJU
            else:
                unit_map[(r, c)] = COMPUTE
    return GridSpec(unit_map=unit_map)


def load_grid(path: str) -> GridSpec:
    with open(path, encoding="utf-8") as fh:
        return GridSpec.from_json(json.load(fh))


def manhattan(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass(frozen=True)
class Route:
    path: tuple[tuple[int, int], ...]
    latency: int


@dataclass
class FeedbackAttachment:
    """In-grid realization of one loop-carried dependency."""

    edge_key: tuple
    producer: int
    consumer: int
    consumer_slot: int
    diff: int
    self_loop: bool
    eor_node: int | None = None  # end-of-route update node, when producer != consumer
    eor_cell: tuple[int, int] | None = None
    extra_latency: int = 0  # routing cycles beyond the single feedback-write cycle

    @property
    def feedback_latency(self) -> int:
        # one cycle to write the retagged result back, plus any re-broadcast route
        return 1 + self.extra_latency


@dataclass
class GridConfig:
    spec: GridSpec
    placement: dict[int, tuple[int, int]]
    routes: dict[tuple, Route]
    feedback: list[FeedbackAttachment]
    selector_init: dict[tuple, int]  # edge key -> threads served by the original input
    eor_updates: list[FeedbackAttachment]
    baseline_only: list[tuple]  # back-edge keys with no in-grid feedback (consecutive)
    port: tuple[int, int] = (0, 0)

    def reinjection_latency(self, consumer: int) -> int:
        """Hop cost of re-entering the grid at the I/O port and reaching the
        consumer cell; charged on top of the flat spill latency."""
        return manhattan(self.port, self.placement[consumer]) * self.spec.hop_latency

    def to_json(self) -> dict:
        return {
            "placement": {str(n): list(c) for n, c in sorted(self.placement.items())},
            "routes": [
                {"edge": list(k), "path": [list(c) for c in r.path], "latency": r.latency}
                for k, r in sorted(self.routes.items())
            ],
            "feedback": [
                {
                    "edge": list(f.edge_key),
                    "producer": f.producer,
                    "consumer": f.consumer,
                    "slot": f.consumer_slot,
                    "diff": f.diff,
                    "self_loop": f.self_loop,
                    "eor_node": f.eor_node,
                    "eor_cell": list(f.eor_cell) if f.eor_cell else None,
                    "feedback_latency": f.feedback_latency,
                }
                for f in self.feedback
            ],
            "selector_init": {",".join(map(str, k)): v for k, v in sorted(self.selector_init.items())},
            "baseline_only": [list(k) for k in self.baseline_only],
        }


def place(g: DataflowGraph, spec: GridSpec) -> dict[int, tuple[int, int]]:
    """Greedy deterministic placement.

    Nodes are taken in BFS order from the graph sources; each goes to the
    free class-correct cell minimizing summed manhattan distance to its
    already-placed intra predecessors (ties: lowest (row, col)).
    """
    need: dict[str, int] = {}
    for nd in g.nodes:
        need[kind_class(nd.kind)] = need.get(kind_class(nd.kind), 0) + 1
    for cls, cnt in sorted(need.items()):
        if cnt > len(spec.cells_of(cls)):
            raise MapError("capacity-exceeded",
                           f"{cnt} {cls} nodes but only {len(spec.cells_of(cls))} cells")

    order = _bfs_order(g)
    preds: dict[int, list[int]] = {nd.id: [] for nd in g.nodes}
    for e in g.intra_edges():
        preds[e.dst].append(e.src)

    free = {cls: list(spec.cells_of(cls)) for cls in (COMPUTE, LDST, CONTROL, SJU)}
    placement: dict[int, tuple[int, int]] = {}
    for nid in order:
        cls = kind_class(g.node(nid).kind)
        anchors = [placement[p] for p in preds[nid] if p in placement]
        best = min(free[cls],
                   key=lambda cell: (sum(manhattan(cell, a) for a in anchors), cell))
        free[cls].remove(best)
        placement[nid] = best
    return placement


def _bfs_order(g: DataflowGraph) -> list[int]:
    has_in = {e.dst for e in g.intra_edges()}
    sources = sorted(nd.id for nd in g.nodes if nd.id not in has_in)
    succ: dict[int, list[int]] = {nd.id: [] for nd in g.nodes}
    for e in g.intra_edges():
        succ[e.src].append(e.dst)
    seen = list(sources)
    seen_set = set(sources)
    i = 0
    while i < len(seen):
        for s in sorted(succ[seen[i]]):
            if s not in seen_set:
                seen_set.add(s)
                seen.append(s)
        i += 1
    for nid in sorted(nd.id for nd in g.nodes):
        if nid not in seen_set:
            seen.append(nid)
    return seen


def _l_path(a: tuple[int, int], b: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """Row-first L-shaped cell path from a to b inclusive."""
    cells = [a]
    r, c = a
    step = 1 if b[0] > r else -1
    while r != b[0]:
        r += step
        cells.append((r, c))
    step = 1 if b[1] > c else -1
    while c != b[1]:
        c += step
        cells.append((r, c))
    return tuple(cells)


def route(placement: dict[int, tuple[int, int]], g: DataflowGraph,
          spec: GridSpec) -> dict[tuple, Route]:
    """Static contention-free routes: latency = manhattan hops * hop latency."""
    routes = {}
    for e in g.edges:
        a, b = placement[e.src], placement[e.dst]
        routes[e.key()] = Route(_l_path(a, b), manhattan(a, b) * spec.hop_latency)
    return routes


def attach_feedback(g: DataflowGraph, deps: list[LoopCarriedDep],
                    placement: dict[int, tuple[int, int]],
                    spec: GridSpec) -> GridConfig:
    """Decide, per dependency, how the back edge is realized in the grid."""
    per_node: dict[int, int] = {}
    for dep in deps:
        per_node[dep.consumer] = per_node.get(dep.consumer, 0) + 1
    for nid, cnt in per_node.items():
        if cnt > 1:
            raise MapError("unsupported-dual-dependency",
                           f"node {nid} has {cnt} dependent input slots; hardware serves one")

    routes = route(placement, g, spec)
    used = set(placement.values())
    free_compute = [c for c in spec.cells_of(COMPUTE) if c not in used]
    next_id = len(g.nodes)

    feedback: list[FeedbackAttachment] = []
    eor_updates: list[FeedbackAttachment] = []
    selector_init: dict[tuple, int] = {}
    baseline_only: list[tuple] = []

    for dep in deps:
        pattern, _mem = classify(g, dep, deps)
        key = dep.back_edge.key()
        if pattern is LoopPattern.CONSECUTIVE:
            baseline_only.append(key)
            continue
        att = FeedbackAttachment(
            edge_key=key,
            producer=dep.producer,
            consumer=dep.consumer,
            consumer_slot=dep.consumer_slot,
            diff=dep.diff,
            self_loop=dep.producer == dep.consumer,
        )
        if not att.self_loop:
            # produce at the end of the route, re-broadcast to the consumer
            pc, cc = placement[dep.producer], placement[dep.consumer]
            if not free_compute:
                raise MapError("capacity-exceeded", "no free COMPUTE cell for update node")
            cell = min(free_compute,
                       key=lambda x: (manhattan(x, pc) + manhattan(x, cc), x))
            free_compute.remove(cell)
            att.eor_node = next_id
            next_id += 1
            att.eor_cell = cell
            att.extra_latency = (manhattan(pc, cell) + manhattan(cell, cc)) * spec.hop_latency
            eor_updates.append(att)
        feedback.append(att)
        selector_init[key] = dep.diff

    return GridConfig(
        spec=spec,
        placement=placement,
        routes=routes,
        feedback=feedback,
        selector_init=selector_init,
        eor_updates=eor_updates,
        baseline_only=baseline_only,
    )


def map_graph(g: DataflowGraph, spec: GridSpec | None = None) -> GridConfig:
    """Full pipeline: dependency analysis, placement, routing, feedback."""
    spec = spec or default_grid()
    deps = find_deps(g, spec.latencies)
    placement = place(g, spec)
    return attach_feedback(g, deps, placement, spec)
