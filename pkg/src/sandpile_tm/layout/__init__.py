"""From automata to sandpiles: cube grids, circuits, synthesis, routing and compilation."""

from .compile import (GLOBAL, LOCAL, TARGETS, VERTEX, CompilePlan, DesignRun, PlacedDesign, PlacedNetlist, compile_plan,
                      emit_plan, export_design, load_plan, parse_plan, place_netlist)
from .grid import CubeGrid
from .netlist import CubeNetlist, WindowTooSmall, ca_to_netlist, lazy_to_netlist, table_to_netlist
from .route import RoutingError, audit, place_and_route, render
from .rules import RuleTable
from .synth import CubeLogic, Ref, expand, synthesize

__all__ = [
    "CompilePlan", "CubeGrid", "CubeLogic", "CubeNetlist", "DesignRun", "GLOBAL", "LOCAL", "PlacedDesign",
    "PlacedNetlist", "place_netlist",
    "Ref", "RoutingError", "RuleTable", "TARGETS", "VERTEX", "WindowTooSmall", "audit", "ca_to_netlist",
    "compile_plan", "emit_plan", "expand", "export_design", "lazy_to_netlist", "load_plan", "parse_plan",
    "place_and_route", "render", "synthesize", "table_to_netlist",
]
