"""Cycle-level simulator and mapping toolchain for tagged-token loop
acceleration on a reconfigurable grid, plus trace-based loop analytics."""

from .analysis import LoopCarriedDep, LoopPattern, classify, find_deps
from .grid import GridConfig, GridSpec, default_grid, map_graph, place, route
from .ir import (
    DataflowGraph,
    DfgError,
    Edge,
    LiveIn,
    Node,
    Violation,
    format_dfg,
    load_dfg,
    parse_dfg,
    reference_execute,
    validate,
)
from .sim import MachineParams, SimReport, Token, ildr_retag, simulate, steady_state_ii

__all__ = [
    "DataflowGraph", "DfgError", "Edge", "LiveIn", "Node", "Violation",
    "parse_dfg", "load_dfg", "format_dfg", "validate", "reference_execute",
    "LoopCarriedDep", "LoopPattern", "find_deps", "classify",
    "GridSpec", "GridConfig", "default_grid", "place", "route", "map_graph",
    "MachineParams", "SimReport", "Token", "ildr_retag", "simulate", "steady_state_ii",
]

__version__ = "0.1.0"
