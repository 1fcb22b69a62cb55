"""Empirical checks of the regret bounds of exact-sum Bayesian CFR.

The tracker watches every full pass, keeping per player the accumulated
opponent-reach terminal coefficients, realised values and immediate
counterfactual regrets. Overall regret is then the best pure deviation
against the accumulated coefficients, found by max-backup or (for small
games) by enumerating every pure strategy.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..config import BRUTE_FORCE_LIMIT
from ..diagnostics.exploitability import pure_deviation_value
from ..games.core import GameSpec
from ..games.tree import GameTree
from ..games.values import node_values, opponent_reach, reach_factors
from .settings import PosteriorMode, SolverConfig
from .tabular import ITERATORS, init_state

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9


class AuditRefusedError(RuntimeError):
    """Raised when brute-force deviation enumeration would be too large."""


class RegretTracker:
    """Accumulates what the overall and immediate regret definitions need."""

    def __init__(self, tree: GameTree, num_types: int) -> None:
        self.tree = tree
        players = tree.spec.num_players
        terminals = len(tree.terminals)
        self.weighted = np.zeros((players, terminals))
        self.per_type = np.zeros((players, terminals, num_types))
        self.realised_weighted = np.zeros(players)
        self.realised_per_type = np.zeros((players, num_types))
        self.immediate = np.zeros((tree.num_infosets, tree.max_actions))
        self.final_weights = np.full(num_types, 1.0 / num_types)
        self.max_range = np.zeros(players)
        self.passes = np.zeros(players, dtype=int)
        self.spans = tree.utilities.max(axis=0) - tree.utilities.min(axis=0)

    def record(self, player: int, sigma: np.ndarray, weights: np.ndarray) -> None:
        tree = self.tree
        weights = np.asarray(weights, dtype=float)
        terminals = list(tree.terminals)
        reach = opponent_reach(reach_factors(tree, sigma), player)
        columns = tree.utilities[:, player, :]
        self.per_type[player] += reach[terminals][:, None] * columns
        self.weighted[player] += reach[terminals] * (columns @ weights)

        values = np.stack(
            [node_values(tree, sigma, player, t) for t in range(tree.spec.num_types)], axis=1
        )
        self.realised_per_type[player] += values[0]
        self.realised_weighted[player] += values[0] @ weights
        for infoset in tree.player_infosets(player):
            count = tree.action_counts[infoset]
            for node in tree.infoset_nodes[infoset]:
                children = list(tree.children[node])
                gains = (values[children] - values[node]) @ weights
                self.immediate[infoset, :count] += reach[node] * gains
        self.max_range[player] = max(self.max_range[player], float(self.spans[player] @ weights))
        self.final_weights = weights
        self.passes[player] += 1


@dataclass(frozen=True)
class PlayerAudit:
    player: int
    overall_regret: float
    overall_regret_per_type: float
    immediate_positive_sum: float
    max_immediate_regret: float
    sum_bound: float
    immediate_bound: float
    payoff_range: float

    @property
    def decomposition_holds(self) -> bool:
        return self.overall_regret <= self.immediate_positive_sum + BOUND_SLACK

    @property
    def bound_holds(self) -> bool:
        return self.overall_regret <= self.sum_bound + BOUND_SLACK

    @property
    def immediate_holds(self) -> bool:
        return self.max_immediate_regret <= self.immediate_bound + BOUND_SLACK


@dataclass(frozen=True)
class AuditReport:
    iteration: int
    players: tuple[PlayerAudit, ...]

    @property
    def holds(self) -> bool:
        return all(
            row.decomposition_holds and row.bound_holds and row.immediate_holds
            for row in self.players
        )


def brute_force_deviation_value(
    tree: GameTree,
    player: int,
    coefficients: np.ndarray,
    *,
    limit: int = BRUTE_FORCE_LIMIT,
) -> float:
    """Best pure deviation value by enumerating every pure strategy."""

    infosets = tree.player_infosets(player)
    total = math.prod(int(tree.action_counts[i]) for i in infosets)
    if total > limit:
        raise AuditRefusedError(f"{total} pure strategies exceed the limit of {limit}")
    position = {infoset: index for index, infoset in enumerate(infosets)}
    requirements = []
    for node in tree.terminals:
        path = []
        current = tree.last_move[node][player]
        while current is not None:
            path.append((position[current[0]], current[1]))
            current = tree.infoset_parent[current[0]]
        requirements.append(path)
    best = -math.inf
    for choice in itertools.product(*(range(tree.action_counts[i]) for i in infosets)):
        value = 0.0
        for terminal, path in enumerate(requirements):
            if all(choice[index] == action for index, action in path):
                value += coefficients[terminal]
        best = max(best, value)
    return best


def audit_report(tracker: RegretTracker, iteration: int, *, brute_force: bool = False) -> AuditReport:
    tree = tracker.tree
    rows = []
    for player in range(tree.spec.num_players):
        passes = max(int(tracker.passes[player]), 1)
        infosets = tree.player_infosets(player)
        max_actions = int(max(tree.action_counts[i] for i in infosets))
        if brute_force:
            best = brute_force_deviation_value(tree, player, tracker.weighted[player])
        else:
            best = float(pure_deviation_value(tree, player, tracker.weighted[player])[0][0])
        overall = (best - tracker.realised_weighted[player]) / passes

        typed_best, _ = pure_deviation_value(tree, player, tracker.per_type[player])
        overall_typed = float(
            (typed_best - tracker.realised_per_type[player]) @ tracker.final_weights
        ) / passes

        positive = np.maximum(tracker.immediate[infosets], 0.0)
        per_infoset = positive.max(axis=1) / passes
        spread = float(tracker.max_range[player])
        root = math.sqrt(max_actions) / math.sqrt(passes)
        rows.append(
            PlayerAudit(
                player=player,
                overall_regret=float(overall),
                overall_regret_per_type=overall_typed,
                immediate_positive_sum=float(per_infoset.sum()),
                max_immediate_regret=float(per_infoset.max(initial=0.0)),
                sum_bound=spread * len(infosets) * root,
                immediate_bound=spread * root,
                payoff_range=spread,
            )
        )
    return AuditReport(iteration=iteration, players=tuple(rows))


def theorem_audit(
    spec: GameSpec,
    config: SolverConfig,
    checkpoints: Sequence[int],
    *,
    brute_force: bool = False,
    competitor_type: int | None = None,
) -> list[AuditReport]:
    """Run exact-sum Bayesian CFR and report regret bounds at each checkpoint."""

    if config.algorithm not in ("bcfr", "bcfr+", "bcfr-no-posterior"):
        raise ValueError(f"Audits run Bayesian CFR variants, not {config.algorithm}")
    if config.resolved_mode(spec.num_types) is not PosteriorMode.EXACT_SUM:
        raise ValueError("Audits need exact posterior sums")
    marks = sorted({int(point) for point in checkpoints if point > 0})
    if not marks:
        raise ValueError("Audit checkpoints must include a positive iteration")
    state = init_state(spec, config, competitor_type=competitor_type)
    state.tracker = RegretTracker(state.tree, spec.num_types)
    step = ITERATORS[config.algorithm]
    reports = []
    for _ in range(marks[-1]):
        step(state)
        if state.iteration in marks:
            report = audit_report(state.tracker, state.iteration, brute_force=brute_force)
            logger.info("audit at %d holds: %s", state.iteration, report.holds)
            reports.append(report)
    return reports
