"""Exponential-weights aggregation over finite dictionaries, with exact and
Monte Carlo checks of its behaviour at low temperature."""
from .core import (
    Dictionary,
    EmpiricalRisks,
    Loss,
    RiskModel,
    aew_weights,
    aggregate_excess_risk,
    aggregate_risk,
    check_simplex,
    empirical_risk,
    erm_indices,
    erm_select,
    progressive_mixture,
)
from .complexity import ExcessRiskProfile, psi, r_bar, lambda_x, k0_partition
from .harness import ExperimentConfig, ResultTable, derive_trial_seed, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Dictionary",
    "EmpiricalRisks",
    "ExcessRiskProfile",
    "ExperimentConfig",
    "Loss",
    "ResultTable",
    "RiskModel",
    "aew_weights",
    "aggregate_excess_risk",
    "aggregate_risk",
    "check_simplex",
    "derive_trial_seed",
    "empirical_risk",
    "erm_indices",
    "erm_select",
    "k0_partition",
    "lambda_x",
    "progressive_mixture",
    "psi",
    "r_bar",
    "run_experiment",
]
