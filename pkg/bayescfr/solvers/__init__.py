"""Tabular, sampled and deep Bayesian CFR solvers."""

from .deep import DeepResult, deep_bcfr_run
from .settings import BeliefConfig, DeepConfig, PosteriorMode, SolverConfig
from .tabular import SolverState, average_profile, init_state, iterate, solve

__all__ = [
    "BeliefConfig",
    "DeepConfig",
    "DeepResult",
    "PosteriorMode",
    "SolverConfig",
    "SolverState",
    "average_profile",
    "deep_bcfr_run",
    "init_state",
    "iterate",
    "solve",
]
