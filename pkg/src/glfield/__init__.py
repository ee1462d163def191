"""Simulation and verification toolkit for spatially-extended GL networks with resets."""

from __future__ import annotations

__version__ = "0.1.0"

from glfield.dynamics import (
    AutonomousDynamics,
    blow_up_time,
    flow,
    hitting_time,
    integrated_intensity,
    invert_integrated_intensity,
)
from glfield.errors import (
    BlowUpExceeded,
    ConfigError,
    DomainError,
    EngineInvariantViolation,
    GLFieldError,
    KindError,
    ParseError,
    PreconditionError,
    SchemaError,
    StabilityError,
    ValidationError,
)
from glfield.field import aggregate_input_study, lln_array_check, solve_neural_field
from glfield.network import (
    NetworkSpec,
    RunConfig,
    SpatialDomain,
    build_nested_grids,
    config_from_dict,
    load_config,
)
from glfield.ph import RateField, simulate_single_neuron_ph, solve_ph_fixed_point
from glfield.rmf import simulate_rmf, simulate_rmf_threshold, spike_counts
from glfield.stats import chen_stein_terms, check_tail_bound, estimate_tv, fit_scaling, tlln_metric

__all__ = [
    "AutonomousDynamics", "flow", "integrated_intensity", "invert_integrated_intensity",
    "blow_up_time", "hitting_time", "GLFieldError", "DomainError", "BlowUpExceeded", "KindError",
    "PreconditionError", "EngineInvariantViolation", "StabilityError", "ConfigError", "ParseError",
    "SchemaError", "ValidationError", "SpatialDomain", "NetworkSpec", "RunConfig",
    "build_nested_grids", "config_from_dict", "load_config", "RateField", "solve_ph_fixed_point",
    "simulate_single_neuron_ph", "simulate_rmf", "simulate_rmf_threshold", "spike_counts",
    "solve_neural_field", "aggregate_input_study", "lln_array_check", "estimate_tv", "fit_scaling",
    "tlln_metric", "check_tail_bound", "chen_stein_terms",
]
