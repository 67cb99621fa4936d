"""Experiment configuration, Monte Carlo drivers and output emission."""

from .config import ExperimentConfig, InitialValue, config_from_dict, load_config
from .experiments import (
    ConvergenceReport,
    LemmaReport,
    MomentReport,
    run_experiment,
    run_kernel_table,
    run_lemma_checks,
    run_oracle,
    run_sde_moments,
    run_strong_rate,
    run_sve_moments,
    run_weak_rate,
)
from .output import emit_outputs

__all__ = [
    "ExperimentConfig",
    "InitialValue",
    "config_from_dict",
    "load_config",
    "ConvergenceReport",
    "LemmaReport",
    "MomentReport",
    "run_experiment",
    "run_kernel_table",
    "run_lemma_checks",
    "run_oracle",
    "run_sde_moments",
    "run_strong_rate",
    "run_sve_moments",
    "run_weak_rate",
    "emit_outputs",
]
