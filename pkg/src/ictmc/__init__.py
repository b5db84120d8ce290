"""Transient analysis of nonstationary call-center queues by multi-step uniformization."""

from .horizon import ErrorLedger, HorizonResult, detection_threshold, solve_horizon
from .measures import (
    MeasureSeries,
    expected_state,
    max_tail_probability,
    measure_series,
    p_immediate_service,
    relative_error_series,
)
from .model import (
    BirthDeathModel,
    Generator,
    ScenarioConfig,
    StepProfile,
    build_generator,
    build_rates,
)
from .scenario import builtin_scenario, load_scenario
from .stationary import ProbabilityVector, stationary_distribution
from .uniformizer import PoissonWindow, StepResult, dtmc_step, poisson_window, solve_step

__all__ = [
    "BirthDeathModel",
    "ErrorLedger",
    "Generator",
    "HorizonResult",
    "MeasureSeries",
    "PoissonWindow",
    "ProbabilityVector",
    "ScenarioConfig",
    "StepProfile",
    "StepResult",
    "build_generator",
    "build_rates",
    "detection_threshold",
    "dtmc_step",
    "expected_state",
    "builtin_scenario",
    "load_scenario",
    "max_tail_probability",
    "measure_series",
    "p_immediate_service",
    "poisson_window",
    "relative_error_series",
    "solve_horizon",
    "solve_step",
]
