from __future__ import annotations

import numpy as np
import pytest

from bayescfr.diagnostics.exploitability import pure_deviation_value
from bayescfr.games.core import GameSpec
from bayescfr.games.poker import build_kuhn
from bayescfr.games.tree import game_tree
from bayescfr.solvers.audit import (
    AuditRefusedError,
    brute_force_deviation_value,
    theorem_audit,
)
from bayescfr.solvers.settings import BeliefConfig, SolverConfig


@pytest.mark.parametrize("player", [0, 1])
def test_brute_force_agrees_with_max_backup(kuhn_normal: GameSpec, player: int) -> None:
    tree = game_tree(kuhn_normal)
    coefficients = np.random.default_rng(player).normal(size=len(tree.terminals))
    backed_up = pure_deviation_value(tree, player, coefficients)[0][0]
    assert brute_force_deviation_value(tree, player, coefficients) == pytest.approx(backed_up)


def test_brute_force_refuses_large_strategy_spaces(kuhn_normal: GameSpec) -> None:
    tree = game_tree(kuhn_normal)
    with pytest.raises(AuditRefusedError, match="exceed the limit"):
        brute_force_deviation_value(tree, 0, np.zeros(len(tree.terminals)), limit=10)


def test_regret_bounds_hold_on_kuhn(kuhn_normal: GameSpec) -> None:
    reports = theorem_audit(kuhn_normal, SolverConfig(algorithm="bcfr"), [1, 10, 100])
    assert [report.iteration for report in reports] == [1, 10, 100]
    for report in reports:
        assert report.holds
        for row in report.players:
            assert row.payoff_range > 0
            assert row.overall_regret <= row.immediate_positive_sum + 1e-9
    late = reports[-1].players
    early = reports[0].players
    assert all(b.sum_bound < a.sum_bound for a, b in zip(early, late))


@pytest.mark.parametrize("type_model", ["pure-c", "pure-a", "mixed-1"])
@pytest.mark.parametrize("algorithm", ["bcfr", "bcfr+"])
def test_regret_bounds_hold_for_every_type_model(type_model: str, algorithm: str) -> None:
    belief = BeliefConfig(references_per_type=200, observation_window=100)
    config = SolverConfig(algorithm=algorithm, belief=belief)
    reports = theorem_audit(build_kuhn(type_model), config, [1, 10, 100])
    assert [report.iteration for report in reports] == [1, 10, 100]
    for report in reports:
        assert report.holds
        for row in report.players:
            assert row.overall_regret <= row.immediate_positive_sum + 1e-9
            assert row.max_immediate_regret <= row.immediate_bound + 1e-9


def test_brute_force_audit_matches_max_backup_audit(kuhn_mixed: GameSpec) -> None:
    config = SolverConfig(algorithm="bcfr", use_belief=False)
    backed_up = theorem_audit(kuhn_mixed, config, [5])
    brute = theorem_audit(kuhn_mixed, config, [5], brute_force=True)
    for fast, slow in zip(backed_up[0].players, brute[0].players):
        assert slow.overall_regret == pytest.approx(fast.overall_regret)
    assert brute[0].holds


def test_plus_variant_is_audited_too(kuhn_normal: GameSpec) -> None:
    (report,) = theorem_audit(kuhn_normal, SolverConfig(algorithm="bcfr+"), [20])
    assert report.holds


def test_audit_rejects_unsupported_runs(kuhn_normal: GameSpec, kuhn_collapsed: GameSpec) -> None:
    with pytest.raises(ValueError, match="Bayesian CFR variants"):
        theorem_audit(kuhn_collapsed, SolverConfig(algorithm="cfr"), [1])
    with pytest.raises(ValueError, match="exact posterior sums"):
        theorem_audit(kuhn_normal, SolverConfig(algorithm="bcfr", posterior_mode="sampled"), [1])
    with pytest.raises(ValueError, match="positive iteration"):
        theorem_audit(kuhn_normal, SolverConfig(algorithm="bcfr"), [0])
