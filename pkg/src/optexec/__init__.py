"""Optimal execution with market and limit orders under fill uncertainty."""

__version__ = "0.1.0"

from .params import (  # noqa: E402
    InfeasibleParametersError,
    ModelParams,
    ParameterError,
    PenaltyParams,
    admissible_alpha_interval,
    beta_floor,
    compute_C,
    derived_constants,
    enforce_explicit_linear_condition,
    t_crit,
    t_max,
    validity_report,
)
from .schedule import ScheduleSpec, WeightSpec, make_schedule, tracking_error  # noqa: E402
from .ode import SolverError, ValueCoefficients, hjb_residual, solve  # noqa: E402
from .policy import (  # noqa: E402
    buy_sell_boundary,
    classify_boundary_monotonicity,
    infinite_uncertainty_policy,
    optimal_controls,
)
from .simulator import (  # noqa: E402
    MCResult,
    SimConfig,
    SimPath,
    estimate_objective,
    pnl_consistency,
    run_scenario_suite,
    simulate_path,
)

__all__ = [
    "InfeasibleParametersError", "ModelParams", "ParameterError", "PenaltyParams",
    "admissible_alpha_interval", "beta_floor", "compute_C", "derived_constants",
    "enforce_explicit_linear_condition", "t_crit", "t_max", "validity_report",
    "ScheduleSpec", "WeightSpec", "make_schedule", "tracking_error",
    "SolverError", "ValueCoefficients", "hjb_residual", "solve",
    "buy_sell_boundary", "classify_boundary_monotonicity", "infinite_uncertainty_policy",
    "optimal_controls", "MCResult", "SimConfig", "SimPath", "estimate_objective",
    "pnl_consistency", "run_scenario_suite", "simulate_path",
]
