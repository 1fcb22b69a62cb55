"""Exact two-player zero-sum equilibria from the sequence-form linear program."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse
from scipy.optimize import linprog

from ..games.core import GameSpec
from ..games.tree import GameTree, game_tree
from ..games.values import StrategyProfile, validate_belief
from .exploitability import UnsupportedGameError, chance_reach

logger = logging.getLogger(__name__)

LP_METHOD = "highs-ds"


@dataclass(frozen=True)
class SequenceFormSolution:
    value: float
    profile: StrategyProfile


@dataclass(frozen=True)
class _Sequences:
    index: dict[tuple[int, int], int]
    constraints: scipy.sparse.csr_matrix

    @property
    def size(self) -> int:
        return len(self.index) + 1


def _sequences(tree: GameTree, player: int) -> _Sequences:
    """Sequence indices (empty sequence first) and the realisation constraints."""

    infosets = tree.player_infosets(player)
    index: dict[tuple[int, int], int] = {}
    for infoset in infosets:
        for position in range(tree.action_counts[infoset]):
            index[(infoset, position)] = len(index) + 1
    rows, cols, data = [0], [0], [1.0]
    for row, infoset in enumerate(infosets, start=1):
        parent = tree.infoset_parent[infoset]
        rows.append(row)
        cols.append(0 if parent is None else index[parent])
        data.append(-1.0)
        for position in range(tree.action_counts[infoset]):
            rows.append(row)
            cols.append(index[(infoset, position)])
            data.append(1.0)
    shape = (len(infosets) + 1, len(index) + 1)
    return _Sequences(index, scipy.sparse.csr_matrix((data, (rows, cols)), shape=shape))


def _payoff_matrix(
    tree: GameTree, first: _Sequences, second: _Sequences, weights: np.ndarray
) -> scipy.sparse.csr_matrix:
    reach = chance_reach(tree)
    rows, cols, data = [], [], []
    for node in tree.terminals:
        moves = tree.last_move[node]
        row = 0 if moves[0] is None else first.index[moves[0]]
        col = 0 if moves[1] is None else second.index[moves[1]]
        payoff = tree.utilities[tree.terminal_of[node], 0] @ weights
        rows.append(row)
        cols.append(col)
        data.append(reach[node] * payoff)
    return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(first.size, second.size))


def _solve_side(
    payoff: scipy.sparse.csr_matrix, own: _Sequences, other: _Sequences
) -> tuple[float, np.ndarray]:
    """Maximise ``min_y x^T A y`` over own realisation plans via LP duality."""

    own_vars = own.size
    dual_vars = other.constraints.shape[0]
    objective = np.zeros(own_vars + dual_vars)
    objective[own_vars] = -1.0
    inequality = scipy.sparse.hstack([-payoff.T, other.constraints.T]).tocsr()
    equality = scipy.sparse.hstack(
        [own.constraints, scipy.sparse.csr_matrix((own.constraints.shape[0], dual_vars))]
    ).tocsr()
    rhs = np.zeros(own.constraints.shape[0])
    rhs[0] = 1.0
    bounds = [(0, None)] * own_vars + [(None, None)] * dual_vars
    result = linprog(
        objective,
        A_ub=inequality,
        b_ub=np.zeros(other.size),
        A_eq=equality,
        b_eq=rhs,
        bounds=bounds,
        method=LP_METHOD,
    )
    if result.status != 0:
        raise RuntimeError(f"Sequence-form LP failed: {result.message}")
    return float(-result.fun), np.asarray(result.x[:own_vars])


def _behavioural(tree: GameTree, player: int, seqs: _Sequences, plan: np.ndarray, table: np.ndarray) -> None:
    plan = np.clip(plan, 0.0, None)
    for infoset in tree.player_infosets(player):
        count = tree.action_counts[infoset]
        parent = tree.infoset_parent[infoset]
        mass = plan[0 if parent is None else seqs.index[parent]]
        row = np.array([plan[seqs.index[(infoset, a)]] for a in range(count)])
        if mass > 1e-15 and row.sum() > 0:
            table[infoset, :count] = row / row.sum()
        else:
            table[infoset, :count] = 1.0 / count


def solve_sequence_form(
    spec: GameSpec,
    belief: Sequence[float] | None = None,
) -> SequenceFormSolution:
    """Equilibrium of the belief-weighted two-player zero-sum game.

    Returns the value for player 0 and a single-slot behavioural profile.
    """

    if spec.num_players != 2 or not spec.zero_sum:
        raise UnsupportedGameError("Sequence-form solving needs a two-player zero-sum game")
    if belief is None:
        belief = spec.type_prior if spec.type_prior is not None else np.full(spec.num_types, 1.0 / spec.num_types)
    weights = validate_belief(spec, belief)
    tree = game_tree(spec)
    first, second = _sequences(tree, 0), _sequences(tree, 1)
    payoff = _payoff_matrix(tree, first, second, weights)
    value, plan_first = _solve_side(payoff, first, second)
    _, plan_second = _solve_side(-payoff.T.tocsr(), second, first)

    table = np.zeros((tree.num_infosets, tree.max_actions))
    _behavioural(tree, 0, first, plan_first, table)
    _behavioural(tree, 1, second, plan_second, table)
    logger.info("sequence-form value of %s: %.12g", spec.name, value)
    return SequenceFormSolution(value, StrategyProfile.from_table(tree, table))

