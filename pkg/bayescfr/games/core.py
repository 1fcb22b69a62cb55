"""Extensive-form Bayesian game model: histories, infosets and typed utilities.

A game is described by a :class:`GameSpec`, a frozen bundle of callbacks over
histories. A history is a tuple of ``(player, action_id)`` pairs; chance moves
are recorded with :data:`CHANCE` as the player.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

CHANCE = -1
TERMINAL = -2
CHANCE_TOLERANCE = 1e-12

History = tuple[tuple[int, int], ...]


class GameStructureError(ValueError):
    """Raised when a history or a game definition violates the tree structure."""


@dataclass(frozen=True, slots=True)
class Action:
    """A move label with its stable identifier."""

    id: int
    label: str


class InfoSetKey(NamedTuple):
    """Canonical infoset identifier: the acting player and its observation."""

    player: int
    observation: str

    def __str__(self) -> str:
        return f"{self.player}:{self.observation}"


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Callbacks describing a finite Bayesian extensive-form game.

    ``legal_actions_fn`` returns the ordered moves at a history (chance outcomes
    at chance nodes, nothing at terminals). ``chance_fn`` returns the outcome
    probabilities aligned with those moves. ``utility_fn`` returns an array of
    shape ``(num_players, num_types)``.
    """

    name: str
    num_players: int
    num_types: int
    legal_actions_fn: Callable[[History], tuple[Action, ...]]
    player_fn: Callable[[History], int]
    chance_fn: Callable[[History], Sequence[float]]
    infoset_fn: Callable[[History], str]
    utility_fn: Callable[[History], np.ndarray]
    features_fn: Callable[[History], np.ndarray] | None = None
    behaviour_fn: Callable[[History, int], np.ndarray] | None = None
    public_features_fn: Callable[[History], np.ndarray] | None = None
    type_labels: tuple[str, ...] = ()
    type_prior: tuple[float, ...] | None = None
    big_blind: float = 1.0
    zero_sum: bool = True
    root: History = ()

    def __post_init__(self) -> None:
        if self.num_players < 1:
            raise GameStructureError("A game needs at least one player")
        if self.num_types < 1:
            raise GameStructureError("A game needs at least one type")
        if self.type_labels and len(self.type_labels) != self.num_types:
            raise GameStructureError(
                f"Expected {self.num_types} type labels, received {len(self.type_labels)}"
            )
        if self.type_prior is not None:
            prior = np.asarray(self.type_prior, dtype=float)
            if prior.shape != (self.num_types,) or np.any(prior < 0):
                raise GameStructureError("Type prior must be a non-negative vector per type")
            if abs(float(prior.sum()) - 1.0) > CHANCE_TOLERANCE:
                raise GameStructureError("Type prior must sum to one")
        if self.big_blind <= 0:
            raise GameStructureError("Big blind must be positive")


def is_terminal(spec: GameSpec, history: History) -> bool:
    return not spec.legal_actions_fn(history)


def validate_history(spec: GameSpec, history: History) -> None:
    """Raise :class:`GameStructureError` unless every step of *history* is legal."""

    history = tuple(history)
    if history[: len(spec.root)] != spec.root:
        raise GameStructureError(f"History {history!r} does not extend the game root")
    for depth in range(len(spec.root), len(history)):
        prefix = history[:depth]
        player, action_id = history[depth]
        legal = spec.legal_actions_fn(prefix)
        if not legal:
            raise GameStructureError(f"History {history!r} continues past a terminal")
        expected = spec.player_fn(prefix)
        if player != expected:
            raise GameStructureError(
                f"Player {player} moved at {prefix!r} where player {expected} acts"
            )
        if action_id not in {action.id for action in legal}:
            raise GameStructureError(f"Action {action_id} is not legal at {prefix!r}")


def legal_actions(spec: GameSpec, history: History) -> list[Action]:
    """Return the ordered legal actions at *history*; empty at terminals."""

    history = tuple(history)
    validate_history(spec, history)
    return list(spec.legal_actions_fn(history))


def acting_player(spec: GameSpec, history: History) -> int:
    history = tuple(history)
    validate_history(spec, history)
    if is_terminal(spec, history):
        return TERMINAL
    return spec.player_fn(history)


def infoset_key(spec: GameSpec, history: History) -> InfoSetKey:
    """Return the infoset key of the player acting at *history*."""

    player = acting_player(spec, history)
    if player < 0:
        raise GameStructureError(f"History {history!r} is not a decision node")
    return InfoSetKey(player, spec.infoset_fn(tuple(history)))


def chance_distribution(spec: GameSpec, history: History) -> list[tuple[Action, float]]:
    """Return ``(outcome, probability)`` pairs at a chance node."""

    if acting_player(spec, history) != CHANCE:
        raise GameStructureError(f"History {history!r} is not a chance node")
    outcomes = spec.legal_actions_fn(tuple(history))
    probabilities = [float(p) for p in spec.chance_fn(tuple(history))]
    if len(probabilities) != len(outcomes):
        raise GameStructureError("Chance probabilities do not match chance outcomes")
    if any(p < 0 for p in probabilities) or abs(sum(probabilities) - 1.0) > CHANCE_TOLERANCE:
        raise GameStructureError(f"Chance distribution at {history!r} is not normalised")
    return list(zip(outcomes, probabilities, strict=True))


def utility(spec: GameSpec, history: History, type_id: int) -> np.ndarray:
    """Return the utility vector over players at terminal *history* for one type."""

    if acting_player(spec, history) != TERMINAL:
        raise GameStructureError(f"History {history!r} is not terminal")
    if not 0 <= type_id < spec.num_types:
        raise GameStructureError(f"Type {type_id} outside 0..{spec.num_types - 1}")
    return np.asarray(spec.utility_fn(tuple(history)), dtype=float)[:, type_id]


def extend(history: History, player: int, action: Action | int) -> History:
    action_id = action.id if isinstance(action, Action) else int(action)
    return tuple(history) + ((player, action_id),)


def rollout_history(
    spec: GameSpec,
    type_id: int,
    rng: np.random.Generator,
    *,
    behaviour: Callable[[History, int], np.ndarray] | None = None,
) -> History:
    """Play one hand to a terminal with every seat following the type's behaviour."""

    policy = behaviour or spec.behaviour_fn
    if policy is None:
        raise GameStructureError(f"Game {spec.name!r} has no behaviour model")
    history = spec.root
    while True:
        moves = spec.legal_actions_fn(history)
        if not moves:
            return history
        player = spec.player_fn(history)
        if player == CHANCE:
            probabilities = np.asarray(spec.chance_fn(history), dtype=float)
        else:
            probabilities = np.asarray(policy(history, type_id), dtype=float)
        choice = int(rng.choice(len(moves), p=probabilities))
        history = history + ((player, moves[choice].id),)


def collapse_types(spec: GameSpec, weights: Sequence[float] | None = None) -> GameSpec:
    """Return a single-type game whose utilities are the weighted type mixture.

    With a point-mass weight vector the collapsed utilities equal that type's
    utilities exactly.
    """

    if weights is None:
        if spec.type_prior is None:
            raise GameStructureError(f"Game {spec.name!r} has no type prior to collapse on")
        weights = spec.type_prior
    mixture = np.asarray(weights, dtype=float)
    if mixture.shape != (spec.num_types,) or np.any(mixture < 0):
        raise GameStructureError("Collapse weights must be a non-negative vector per type")
    if abs(float(mixture.sum()) - 1.0) > CHANCE_TOLERANCE:
        raise GameStructureError("Collapse weights must sum to one")
    support = np.flatnonzero(mixture)

    def collapsed_utility(history: History) -> np.ndarray:
        values = np.asarray(spec.utility_fn(history), dtype=float)
        if len(support) == 1:
            return values[:, support[0] : support[0] + 1].copy()
        return (values[:, support] @ mixture[support])[:, None]

    return dataclasses.replace(
        spec,
        name=f"{spec.name}/collapsed",
        num_types=1,
        utility_fn=collapsed_utility,
        type_labels=("collapsed",),
        type_prior=(1.0,),
    )
