"""Strategy profiles plus reach, value and counterfactual computations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import CHANCE, TERMINAL, GameSpec, GameStructureError, History, InfoSetKey
from .tree import GameTree, game_tree

PROFILE_TOLERANCE = 1e-12
BELIEF_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Behaviour strategies for every infoset, optionally one slot per type.

    ``probabilities`` has shape ``(slots, infosets, max_actions)`` in the infoset
    order of the owning tree; padding past each infoset's action count is zero.
    A single slot is shared by every type.
    """

    keys: tuple[InfoSetKey, ...]
    action_counts: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probabilities = np.asarray(self.probabilities, dtype=float)
        if probabilities.ndim != 3 or probabilities.shape[1] != len(self.keys):
            raise ValueError("Strategy table shape does not match the infoset list")
        counts = np.asarray(self.action_counts, dtype=int)
        mask = np.arange(probabilities.shape[2])[None, :] < counts[:, None]
        if np.any(probabilities < 0) or not np.all(np.isfinite(probabilities)):
            raise ValueError("Strategy probabilities must be finite and non-negative")
        if np.any(probabilities[:, ~mask] != 0):
            raise ValueError("Strategy assigns probability to an illegal action")
        totals = probabilities.sum(axis=2)
        if np.any(np.abs(totals - 1.0) > PROFILE_TOLERANCE):
            raise ValueError("Strategy rows must sum to one over legal actions")
        object.__setattr__(self, "probabilities", probabilities)
        object.__setattr__(self, "action_counts", counts)

    @property
    def num_slots(self) -> int:
        return self.probabilities.shape[0]

    def slot(self, type_id: int) -> int:
        return 0 if self.num_slots == 1 else type_id

    def table(self, type_id: int) -> np.ndarray:
        """Return the ``(infosets, max_actions)`` table played by *type_id*."""

        return self.probabilities[self.slot(type_id)]

    def policy(self, type_id: int, key: InfoSetKey | int) -> np.ndarray:
        index = key if isinstance(key, int) else self._index(key)
        return self.table(type_id)[index, : self.action_counts[index]]

    def as_mapping(self) -> dict[tuple[int, InfoSetKey], np.ndarray]:
        return {
            (slot, key): self.probabilities[slot, index, : self.action_counts[index]].copy()
            for slot in range(self.num_slots)
            for index, key in enumerate(self.keys)
        }

    def matches(self, tree: GameTree) -> bool:
        return self.keys == tree.infoset_keys and np.array_equal(
            self.action_counts, tree.action_counts
        )

    def _index(self, key: InfoSetKey) -> int:
        try:
            return self.keys.index(key)
        except ValueError as exc:
            raise GameStructureError(f"Profile does not cover infoset {key}") from exc

    @classmethod
    def uniform(cls, tree: GameTree, num_slots: int = 1) -> StrategyProfile:
        mask = tree.action_mask()
        rows = mask / tree.action_counts[:, None]
        return cls(tree.infoset_keys, tree.action_counts, np.repeat(rows[None], num_slots, 0))

    @classmethod
    def from_table(cls, tree: GameTree, table: np.ndarray) -> StrategyProfile:
        table = np.asarray(table, dtype=float)
        if table.ndim == 2:
            table = table[None]
        return cls(tree.infoset_keys, tree.action_counts, table)

    @classmethod
    def from_mapping(
        cls,
        tree: GameTree,
        mapping: Mapping[tuple[int, InfoSetKey], Sequence[float]],
        num_slots: int = 1,
    ) -> StrategyProfile:
        table = np.zeros((num_slots, tree.num_infosets, tree.max_actions))
        for slot in range(num_slots):
            for index, key in enumerate(tree.infoset_keys):
                try:
                    row = np.asarray(mapping[(slot, key)], dtype=float)
                except KeyError as exc:
                    raise ValueError(f"Profile does not cover infoset {key}") from exc
                table[slot, index, : len(row)] = row
        return cls(tree.infoset_keys, tree.action_counts, table)


@dataclass(frozen=True, slots=True)
class ReachProbability:
    """Reach of a history factored into chance and per-player contributions."""

    total: float
    chance: float
    players: tuple[float, ...]

    def own(self, player: int) -> float:
        return self.players[player]

    def excluding(self, player: int) -> float:
        value = self.chance
        for other, factor in enumerate(self.players):
            if other != player:
                value *= factor
        return value


@dataclass(frozen=True, slots=True)
class CounterfactualValues:
    """Counterfactual value of an infoset and of each of its actions."""

    baseline: float
    action_values: np.ndarray


def _check_profile(tree: GameTree, profile: StrategyProfile) -> None:
    if not profile.matches(tree):
        raise ValueError(f"Profile infosets do not match game {tree.spec.name!r}")


def _check_type(spec: GameSpec, type_id: int) -> None:
    if not 0 <= type_id < spec.num_types:
        raise GameStructureError(f"Type {type_id} outside 0..{spec.num_types - 1}")


def validate_belief(spec: GameSpec, belief: Sequence[float]) -> np.ndarray:
    weights = np.asarray(belief, dtype=float)
    if weights.shape != (spec.num_types,):
        raise ValueError(f"Belief must have {spec.num_types} entries, received {weights.shape}")
    if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > BELIEF_TOLERANCE:
        raise ValueError("Belief must be a probability vector")
    return weights


def reach_probability(
    spec: GameSpec,
    profile: StrategyProfile,
    type_id: int,
    history: History,
) -> ReachProbability:
    """Return the reach of *history* when every seat plays *profile* as *type_id*."""

    tree = game_tree(spec)
    _check_profile(tree, profile)
    _check_type(spec, type_id)
    table = profile.table(type_id)
    node = tree.node_index(history)
    path = [node]
    parents = _parents(tree)
    while parents[path[-1]] >= 0:
        path.append(parents[path[-1]])
    path.reverse()

    chance = 1.0
    players = [1.0] * spec.num_players
    total = 1.0
    for parent, child in zip(path, path[1:]):
        position = tree.children[parent].index(child)
        acting = tree.players[parent]
        if acting == CHANCE:
            factor = float(tree.chance_probs[parent][position])
            chance *= factor
        else:
            factor = float(table[tree.infoset_of[parent], position])
            players[acting] *= factor
        total *= factor
    return ReachProbability(total=total, chance=chance, players=tuple(players))


def reach_factors(tree: GameTree, table: np.ndarray) -> np.ndarray:
    """Return per-node reach factors, one column per player plus chance last."""

    columns = tree.spec.num_players + 1
    factors = np.ones((tree.num_nodes, columns))
    for node, acting in enumerate(tree.players):
        if acting == TERMINAL:
            continue
        if acting == CHANCE:
            probs = tree.chance_probs[node]
            column = columns - 1
        else:
            probs = table[tree.infoset_of[node]]
            column = acting
        for position, child in enumerate(tree.children[node]):
            row = factors[node].copy()
            row[column] *= probs[position]
            factors[child] = row
    return factors


def opponent_reach(factors: np.ndarray, player: int) -> np.ndarray:
    """Product of every reach column except *player*'s (chance included)."""

    keep = np.ones(factors.shape[1], dtype=bool)
    keep[player] = False
    return factors[:, keep].prod(axis=1)


def node_values(tree: GameTree, table: np.ndarray, player: int, type_id: int) -> np.ndarray:
    """Expected utility of *player* below every node under *table*."""

    values = np.zeros(tree.num_nodes)
    for node in range(tree.num_nodes - 1, -1, -1):
        acting = tree.players[node]
        if acting == TERMINAL:
            values[node] = tree.utilities[tree.terminal_of[node], player, type_id]
            continue
        child_values = values[list(tree.children[node])]
        if acting == CHANCE:
            values[node] = float(tree.chance_probs[node] @ child_values)
        else:
            infoset = tree.infoset_of[node]
            probs = table[infoset, : tree.action_counts[infoset]]
            values[node] = float(probs @ child_values)
    return values


def expected_value(
    spec: GameSpec,
    profile: StrategyProfile,
    belief: Sequence[float],
) -> np.ndarray:
    """Belief-weighted expected utility per player."""

    tree = game_tree(spec)
    _check_profile(tree, profile)
    weights = validate_belief(spec, belief)
    terminals = list(tree.terminals)
    total = np.zeros(spec.num_players)
    for type_id in np.flatnonzero(weights):
        factors = reach_factors(tree, profile.table(int(type_id)))
        reach = factors[terminals].prod(axis=1)
        total += weights[type_id] * (reach @ tree.utilities[:, :, type_id])
    return total


def counterfactual_values(
    spec: GameSpec,
    profile: StrategyProfile,
    type_id: int,
    player: int,
) -> dict[InfoSetKey, CounterfactualValues]:
    """Counterfactual infoset and action values for *player* under type *type_id*."""

    tree = game_tree(spec)
    _check_profile(tree, profile)
    _check_type(spec, type_id)
    if not 0 <= player < spec.num_players:
        raise GameStructureError(f"Unknown player {player}")
    table = profile.table(type_id)
    reach = opponent_reach(reach_factors(tree, table), player)
    values = node_values(tree, table, player, type_id)

    result: dict[InfoSetKey, CounterfactualValues] = {}
    for infoset in tree.player_infosets(player):
        actions = np.zeros(tree.action_counts[infoset])
        baseline = 0.0
        for node in tree.infoset_nodes[infoset]:
            baseline += reach[node] * values[node]
            actions += reach[node] * values[list(tree.children[node])]
        result[tree.infoset_keys[infoset]] = CounterfactualValues(baseline, actions)
    return result


def _parents(tree: GameTree) -> list[int]:
    parents = [-1] * tree.num_nodes
    for node, kids in enumerate(tree.children):
        for child in kids:
            parents[child] = node
    return parents
