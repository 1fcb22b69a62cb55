"""Best responses and exploitability of strategy profiles in typed zero-sum games."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..games.core import CHANCE, TERMINAL, GameSpec
from ..games.tree import GameTree, game_tree
from ..games.values import (
    StrategyProfile,
    expected_value,
    opponent_reach,
    reach_factors,
    validate_belief,
)

logger = logging.getLogger(__name__)


class UnsupportedGameError(ValueError):
    """Raised when exploitability is requested for a non-zero-sum game."""


@dataclass(frozen=True)
class ExploitabilityReport:
    exploitability: float
    mbb_per_game: float
    best_response_values: tuple[float, ...]
    profile_values: tuple[float, ...]
    belief: tuple[float, ...]
    big_blind: float
    source: str = ""
    iteration: int = 0


def to_mbbg(epsilon: float, big_blind: float) -> float:
    """Convert a chip-denominated exploitability to milli-big-blinds per game."""

    if big_blind <= 0:
        raise ValueError("Big blind must be positive")
    return 1000.0 * epsilon / big_blind


def pure_deviation_value(
    tree: GameTree,
    player: int,
    coefficients: np.ndarray,
    *,
    weights: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Best pure deviation of *player* against fixed terminal coefficients.

    ``coefficients`` has shape ``(terminals, columns)``; each terminal's entry
    already folds in chance and opponent reach. Without *weights* every column
    picks its own deviation; with *weights* one deviation maximises the
    weighted column sum. Infosets are resolved deepest first. Returns the
    per-column value and the chosen action position per infoset and column.
    """

    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.ndim == 1:
        coefficients = coefficients[:, None]
    columns = coefficients.shape[1]
    choices = np.zeros((tree.num_infosets, columns), dtype=int)
    memo: list[np.ndarray | None] = [None] * tree.num_nodes

    def value(node: int) -> np.ndarray:
        cached = memo[node]
        if cached is not None:
            return cached
        acting = tree.players[node]
        if acting == TERMINAL:
            result = coefficients[tree.terminal_of[node]]
        elif acting == player:
            infoset = tree.infoset_of[node]
            kids = tree.children[node]
            result = np.array(
                [value(kids[choices[infoset, column]])[column] for column in range(columns)]
            )
        else:
            result = np.zeros(columns)
            for child in tree.children[node]:
                result = result + value(child)
        memo[node] = result
        return result

    order = sorted(tree.player_infosets(player), key=lambda i: -tree.infoset_depth[i])
    for infoset in order:
        q_values = np.zeros((tree.action_counts[infoset], columns))
        for node in tree.infoset_nodes[infoset]:
            for position, child in enumerate(tree.children[node]):
                q_values[position] += value(child)
        if weights is None:
            choices[infoset] = np.argmax(q_values, axis=0)
        else:
            choices[infoset] = int(np.argmax(q_values @ weights))
    root = value(0)
    return np.asarray(root, dtype=float), choices


def terminal_coefficients(
    tree: GameTree,
    profile: StrategyProfile,
    player: int,
) -> np.ndarray:
    """Opponent-and-chance reach times utility per terminal and type."""

    terminals = list(tree.terminals)
    columns = []
    for type_id in range(tree.spec.num_types):
        factors = reach_factors(tree, profile.table(type_id))
        reach = opponent_reach(factors, player)[terminals]
        columns.append(reach * tree.utilities[:, player, type_id])
    return np.stack(columns, axis=1)


def best_response(
    spec: GameSpec,
    opponent: StrategyProfile,
    belief: Sequence[float],
    player: int,
    *,
    typed: bool = True,
) -> tuple[float, StrategyProfile]:
    """Value and pure profile of *player*'s best response to *opponent*.

    With ``typed`` the responder picks a deviation per type and the value is
    the belief-weighted sum; otherwise one deviation maximises the
    belief-weighted value. Rows of other players keep the opponent's play.
    """

    tree = game_tree(spec)
    if not opponent.matches(tree):
        raise ValueError(f"Profile infosets do not match game {spec.name!r}")
    if not 0 <= player < spec.num_players:
        raise ValueError(f"Unknown player {player}")
    weights = validate_belief(spec, belief)
    coefficients = terminal_coefficients(tree, opponent, player)
    values, choices = pure_deviation_value(
        tree, player, coefficients, weights=None if typed else weights
    )
    table = np.stack([opponent.table(t) for t in range(spec.num_types)]).copy()
    for infoset in tree.player_infosets(player):
        table[:, infoset] = 0.0
        for type_id in range(spec.num_types):
            table[type_id, infoset, choices[infoset, type_id]] = 1.0
    return float(values @ weights), StrategyProfile.from_table(tree, table)


def exploitability(
    spec: GameSpec,
    profile: StrategyProfile,
    belief: Sequence[float],
    *,
    typed: bool = True,
    source: str = "",
    iteration: int = 0,
) -> ExploitabilityReport:
    """Sum over players of the best-response gain against *profile*."""

    if not spec.zero_sum:
        raise UnsupportedGameError(f"Game {spec.name!r} is not zero-sum")
    weights = validate_belief(spec, belief)
    profile_values = expected_value(spec, profile, weights)
    responses = [
        best_response(spec, profile, weights, player, typed=typed)[0]
        for player in range(spec.num_players)
    ]
    epsilon = float(sum(responses) - profile_values.sum())
    report = ExploitabilityReport(
        exploitability=epsilon,
        mbb_per_game=to_mbbg(epsilon, spec.big_blind),
        best_response_values=tuple(responses),
        profile_values=tuple(float(v) for v in profile_values),
        belief=tuple(float(w) for w in weights),
        big_blind=spec.big_blind,
        source=source,
        iteration=iteration,
    )
    logger.debug("exploitability of %s at %d: %.6g", source or spec.name, iteration, epsilon)
    return report


def chance_reach(tree: GameTree) -> np.ndarray:
    """Chance-only reach per node."""

    reach = np.ones(tree.num_nodes)
    for node, acting in enumerate(tree.players):
        if acting == CHANCE:
            for position, child in enumerate(tree.children[node]):
                reach[child] = reach[node] * tree.chance_probs[node][position]
        elif acting != TERMINAL:
            for child in tree.children[node]:
                reach[child] = reach[node]
    return reach
