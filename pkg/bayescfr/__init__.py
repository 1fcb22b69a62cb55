"""Public API for the bayescfr Bayesian counterfactual regret toolkit."""

from __future__ import annotations

from ._version import __version__
from .belief import (
    BeliefState,
    KernelConfig,
    SampleBank,
    posterior_l1,
    posterior_l1_error,
    posterior_update,
)
from .config import algorithm_is_baseline
from .diagnostics.equilibrium import solve_sequence_form
from .diagnostics.exploitability import ExploitabilityReport, best_response, exploitability, to_mbbg
from .games.core import GameSpec, collapse_types
from .games.poker import build_game, standard_type_models, type_model
from .games.tree import game_tree
from .games.values import StrategyProfile, expected_value
from .harness import ExperimentConfig, load_config, run
from .solvers.deep import deep_bcfr_run
from .solvers.settings import SolverConfig
from .solvers.tabular import average_profile, solve

__all__ = [
    "BeliefState",
    "ExperimentConfig",
    "ExploitabilityReport",
    "GameSpec",
    "KernelConfig",
    "SampleBank",
    "SolverConfig",
    "StrategyProfile",
    "average_profile",
    "best_response",
    "build_game",
    "collapse_types",
    "deep_bcfr_run",
    "expected_value",
    "exploitability",
    "game_tree",
    "load_config",
    "posterior_l1",
    "posterior_l1_error",
    "posterior_update",
    "run",
    "solve",
    "solve_sequence_form",
    "solve_game",
    "standard_type_models",
    "to_mbbg",
    "type_model",
    "__version__",
]


def solve_game(
    game: str,
    type_model_name: str = "pure-n",
    algorithm: str = "bcfr",
    *,
    iterations: int = 1000,
    seed: int = 0,
) -> tuple[StrategyProfile, ExploitabilityReport]:
    """Solve *game* under *type_model_name* and report exploitability under its prior.

    Baselines solve the prior-averaged game; the returned profile is evaluated on
    the typed game either way.
    """

    typed = build_game(game, type_model_name)
    spec = collapse_types(typed) if algorithm_is_baseline(algorithm) else typed
    config = SolverConfig(algorithm=algorithm, iterations=iterations, seed=seed)
    if algorithm == "deep-bcfr":
        profile = deep_bcfr_run(spec, config).profile
    else:
        profile = average_profile(solve(spec, config))
    prior = typed.type_prior or tuple([1.0 / typed.num_types] * typed.num_types)
    return profile, exploitability(typed, profile, prior, source=algorithm, iteration=iterations)
