"""Walk through the loop-carried dependency patterns on the bundled graphs.

For each fixture this prints the back edges found, the dependent path the
carried value travels, the pattern class, and how the mapper realizes the
feedback in the grid (in-place update, an end-of-route update node, or a
fallback to baseline-style spilling).
"""

import pathlib

from loopgrid.analysis import classify, find_deps, path_latency
from loopgrid.grid import map_graph
from loopgrid.ir import load_dfg

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

SHOWCASE = [
    ("scenario1.dfg", "self-feedback accumulator"),
    ("scenario2.dfg", "carried value also feeds an off-path consumer"),
    ("scenario3.dfg", "off-path edge upstream of the producer"),
    ("scenario4.dfg", "accumulator fed by a pipelined memory stream"),
    ("scenario5.dfg", "several deps sharing path nodes"),
]


def main():
    for name, blurb in SHOWCASE:
        g = load_dfg(str(FIXTURES / name))
        deps = find_deps(g)
        print(f"== {name}: {blurb}")
        cfg = map_graph(g)
        for dep in deps:
            pattern, mem = classify(g, dep, deps)
            print(f"   back edge {dep.producer}->{dep.consumer} "
                  f"(slot {dep.consumer_slot}, distance {dep.diff})")
            print(f"   dependent path {list(dep.dependent_path)}, "
                  f"{path_latency(g, dep.dependent_path)} cycles of unit latency")
            print(f"   pattern {pattern.value}, touches memory: {mem}")
        if cfg.baseline_only:
            print("   mapping: no in-grid feedback; values spill and reinject")
        for f in cfg.feedback:
            if f.self_loop:
                print("   mapping: producer updates its own input slot "
                      f"(feedback latency {f.feedback_latency})")
            else:
                print(f"   mapping: update node at {f.eor_cell} relays the "
                      f"carried value (feedback latency {f.feedback_latency})")
        print()


if __name__ == "__main__":
    main()
