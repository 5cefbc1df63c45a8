"""Linearized model predictive control for building HVAC.

The plant is a bilinear RC thermal model; the controller feedback-linearizes
it, maps actuator bounds, freezes outputs over the window and replaces the
cubic fan power with a piecewise-linear model, so every step is one LP.
"""
from .lmpc import LMPCConfig, LMPCController, assemble_lp, control_step, lp_at_step, run_lmpc
from .linearize import (
    MappedBounds, PWLApprox, build_pwl, freeze_outputs, map_bounds_initial, map_bounds_receding,
    recover_air_mass_flow, to_linearized_input,
)
from .nlmpc import GridSpec, NLMPCConfig, brute_force_nlmpc, compare, iterative_nlmpc
from .plant import Trace, measure, plant_step, run_closed_loop
from .power import HvacParams, PowerBreakdown, chiller_power, fan_power, total_power
from .reference import generate_reference, reference_network, single_room_network, single_zone_network
from .scenario import ComfortMax, CostMin, DisturbanceSeries, Scenario, load_scenario, save_scenario
from .thermal import BuildingModel, RCNetwork, Room, Wall, assemble_state_space, validate_model
from .traceio import emit_plots, read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "LMPCConfig", "LMPCController", "assemble_lp", "control_step", "lp_at_step", "run_lmpc",
    "MappedBounds", "PWLApprox", "build_pwl", "freeze_outputs", "map_bounds_initial",
    "map_bounds_receding", "recover_air_mass_flow", "to_linearized_input",
    "GridSpec", "NLMPCConfig", "brute_force_nlmpc", "compare", "iterative_nlmpc",
    "Trace", "measure", "plant_step", "run_closed_loop",
    "HvacParams", "PowerBreakdown", "chiller_power", "fan_power", "total_power",
    "generate_reference", "reference_network", "single_room_network", "single_zone_network",
    "ComfortMax", "CostMin", "DisturbanceSeries", "Scenario", "load_scenario", "save_scenario",
    "BuildingModel", "RCNetwork", "Room", "Wall", "assemble_state_space", "validate_model",
    "emit_plots", "read_trace", "write_trace",
]
