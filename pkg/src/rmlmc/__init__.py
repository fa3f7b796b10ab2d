"""Unbiased randomized multilevel Monte Carlo with hull-optimal level distributions."""

from .errors import (
    ContractViolation,
    DegenerateProfileError,
    DomainError,
    ResourceCapError,
    RMLMCError,
    ShapeError,
)
from .estimators import (
    CoupledSumEstimator,
    IndependentSumEstimator,
    TruncationSampler,
    check_coupled_condition,
    check_independent_condition,
    check_sufficient_condition,
    coupled_variance_formula,
    independent_variance_formula,
    mu_tilde_profile,
)
from .experiment import ExperimentConfig, ExperimentReport, emit_report, run_experiment
from .pilot import PilotConfig, PilotResult, run_pilot
from .schedule_opt import (
    HullResult,
    extend_tail,
    lower_hull,
    objective_R,
    optimal_distribution,
    optimal_distribution_oracle,
    optimal_value,
)
from .sde import GbmParams, SdeModel, black_scholes_call, call_payoff, gbm_model
from .streams import stream

__version__ = "0.1.0"
