"""Typed two-player poker: Kuhn and Leduc hold'em with per-type payoff rules."""

from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..config import MIXTURE_PERCENTAGES, PURE_TYPE_MODELS, TYPE_MODELS
from .core import CHANCE, Action, GameSpec, GameStructureError, History

logger = logging.getLogger(__name__)

CHECK, BET, FOLD, CALL, RAISE = range(5)
POKER_ACTIONS = (
    Action(CHECK, "check"),
    Action(BET, "bet"),
    Action(FOLD, "fold"),
    Action(CALL, "call"),
    Action(RAISE, "raise"),
)
ACTION_CODES = "kbfcr"
RANK_NAMES = "JQKA"


class PayoffKind(str, Enum):
    NORMAL = "normal"
    CONSERVATIVE = "conservative"
    AGGRESSIVE = "aggressive"


TYPE_ORDER = (PayoffKind.NORMAL, PayoffKind.CONSERVATIVE, PayoffKind.AGGRESSIVE)


@dataclass(frozen=True)
class PotState:
    """Chips committed per player, measured against a big-blind unit."""

    stakes: tuple[float, ...]
    big_blind: float = 1.0
    minimum_pot: float = 2.0

    def __post_init__(self) -> None:
        if self.big_blind <= 0 or self.minimum_pot <= 0:
            raise ValueError("Big blind and minimum pot must be positive")
        if any(stake < 0 for stake in self.stakes):
            raise ValueError("Stakes must be non-negative")

    @property
    def total(self) -> float:
        return float(sum(self.stakes))


def payoff_transform(kind: PayoffKind, winner: int | None, pot: PotState) -> np.ndarray:
    """Map a showdown or fold outcome onto per-player utilities for one payoff kind.

    ``winner`` is ``None`` for a split pot, which pays zero to everyone.
    """

    players = len(pot.stakes)
    result = np.zeros(players)
    if winner is None:
        return result
    if not 0 <= winner < players:
        raise ValueError(f"Winner {winner} outside 0..{players - 1}")
    kind = PayoffKind(kind)
    if kind is PayoffKind.CONSERVATIVE:
        result[:] = -pot.big_blind
        result[winner] = pot.big_blind * (players - 1)
        return result
    for player, stake in enumerate(pot.stakes):
        if player != winner:
            result[player] = -stake
            result[winner] += stake
    if kind is PayoffKind.AGGRESSIVE:
        result *= pot.total / pot.minimum_pot
    return result


@dataclass(frozen=True)
class TypeModel:
    """Payoff kinds with an exact rational prior over them."""

    name: str
    kinds: tuple[PayoffKind, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.kinds or len(self.kinds) != len(self.weights):
            raise ValueError("Type model needs one weight per payoff kind")
        if any(weight < 0 for weight in self.weights):
            raise ValueError("Type weights must be non-negative")
        if sum(self.weights) != 1:
            raise ValueError(f"Type weights of {self.name!r} must sum to one")

    @property
    def prior(self) -> tuple[float, ...]:
        return tuple(float(weight) for weight in self.weights)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(kind.value for kind in self.kinds)

    @classmethod
    def from_ratios(
        cls, name: str, kinds: Sequence[PayoffKind], ratios: Sequence[int | Fraction]
    ) -> TypeModel:
        total = sum(Fraction(ratio) for ratio in ratios)
        if total <= 0:
            raise ValueError("Type ratios must have a positive total")
        return cls(name, tuple(kinds), tuple(Fraction(ratio) / total for ratio in ratios))


def type_model(name: str) -> TypeModel:
    """Return a named type model; pure models keep all three kinds with a point prior."""

    if name not in TYPE_MODELS:
        raise ValueError(f"Unknown type model {name!r}; expected one of {', '.join(TYPE_MODELS)}")
    if name in PURE_TYPE_MODELS:
        ratios = [int(index == PURE_TYPE_MODELS.index(name)) for index in range(3)]
    else:
        ratios = list(MIXTURE_PERCENTAGES[name])
    return TypeModel.from_ratios(name, TYPE_ORDER, ratios)


def standard_type_models() -> dict[str, TypeModel]:
    return {name: type_model(name) for name in TYPE_MODELS}


@dataclass(frozen=True)
class PokerRules:
    name: str
    ranks: int
    copies: int
    ante: float
    bet_sizes: tuple[float, ...]
    max_raises: int

    @property
    def deck_size(self) -> int:
        return self.ranks * self.copies

    @property
    def num_rounds(self) -> int:
        return len(self.bet_sizes)

    def rank(self, card: int) -> int:
        return card // self.copies

    @functools.cached_property
    def deals(self) -> tuple[tuple[int, int], ...]:
        return tuple(itertools.permutations(range(self.deck_size), 2))


KUHN_RULES = PokerRules("kuhn", ranks=3, copies=1, ante=1.0, bet_sizes=(1.0,), max_raises=1)
LEDUC_RULES = PokerRules("leduc", ranks=3, copies=2, ante=1.0, bet_sizes=(2.0, 4.0), max_raises=2)


@dataclass
class HandState:
    phase: str = "deal"
    hole: tuple[int, int] | None = None
    board: int | None = None
    round: int = 0
    lines: list[str] = field(default_factory=list)
    stakes: list[float] = field(default_factory=list)
    round_chips: list[float] = field(default_factory=list)
    raises: int = 0
    to_act: int = 0
    folded: int | None = None

    def facing(self) -> bool:
        return self.stakes[self.to_act] < self.stakes[1 - self.to_act]


@functools.lru_cache(maxsize=1 << 17)
def replay(rules: PokerRules, history: History) -> HandState:
    """Replay *history* under *rules*; raises :class:`GameStructureError` if illegal."""

    state = HandState(stakes=[rules.ante, rules.ante])
    for player, action_id in history:
        if state.phase == "terminal":
            raise GameStructureError(f"History {history!r} continues past a terminal")
        if state.phase in ("deal", "board"):
            if player != CHANCE:
                raise GameStructureError(f"Expected a chance move in {history!r}")
            _apply_chance(rules, state, action_id, history)
            continue
        if player != state.to_act:
            raise GameStructureError(f"Player {player} acted out of turn in {history!r}")
        if action_id not in _legal_ids(rules, state):
            raise GameStructureError(f"Illegal action {action_id} in {history!r}")
        _apply_action(rules, state, action_id)
    return state


def _apply_chance(rules: PokerRules, state: HandState, outcome: int, history: History) -> None:
    if state.phase == "deal":
        if not 0 <= outcome < len(rules.deals):
            raise GameStructureError(f"Unknown deal {outcome} in {history!r}")
        state.hole = rules.deals[outcome]
    else:
        remaining = _board_cards(rules, state)
        if not 0 <= outcome < len(remaining):
            raise GameStructureError(f"Unknown board card {outcome} in {history!r}")
        state.board = remaining[outcome]
        state.round += 1
    state.phase = "act"
    state.lines.append("")
    state.round_chips.append(0.0)
    state.raises = 0
    state.to_act = 0


def _board_cards(rules: PokerRules, state: HandState) -> list[int]:
    return [card for card in range(rules.deck_size) if card not in state.hole]


def _legal_ids(rules: PokerRules, state: HandState) -> tuple[int, ...]:
    if state.facing():
        if state.raises < rules.max_raises:
            return (FOLD, CALL, RAISE)
        return (FOLD, CALL)
    return (CHECK, BET)


def _apply_action(rules: PokerRules, state: HandState, action_id: int) -> None:
    player = state.to_act
    other = 1 - player
    state.lines[-1] += ACTION_CODES[action_id]
    end_of_round = False
    if action_id == FOLD:
        state.folded = player
        state.phase = "terminal"
        return
    if action_id == CHECK:
        end_of_round = state.lines[-1] == "kk"
    elif action_id == CALL:
        state.round_chips[-1] += state.stakes[other] - state.stakes[player]
        state.stakes[player] = state.stakes[other]
        end_of_round = True
    else:
        target = state.stakes[other] + rules.bet_sizes[state.round]
        state.round_chips[-1] += target - state.stakes[player]
        state.stakes[player] = target
        state.raises += 1
    state.to_act = other
    if end_of_round:
        state.phase = "terminal" if state.round == rules.num_rounds - 1 else "board"


def _winner(rules: PokerRules, state: HandState) -> int | None:
    if state.folded is not None:
        return 1 - state.folded
    ranks = [rules.rank(card) for card in state.hole]
    if state.board is not None:
        board = rules.rank(state.board)
        paired = [rank == board for rank in ranks]
        if paired[0] != paired[1]:
            return 0 if paired[0] else 1
    if ranks[0] == ranks[1]:
        return None
    return 0 if ranks[0] > ranks[1] else 1


def hand_strength(rules: PokerRules, state: HandState, player: int) -> float:
    """Heuristic strength in [0, 1]: card rank, or 1 when paired with the board."""

    rank = rules.rank(state.hole[player])
    if state.board is not None and rank == rules.rank(state.board):
        return 1.0
    return rank / (rules.ranks - 1)


@dataclass(frozen=True)
class ScriptedStyle:
    aggression: float
    looseness: float


SCRIPTED_STYLES = {
    PayoffKind.NORMAL: ScriptedStyle(aggression=0.5, looseness=0.5),
    PayoffKind.CONSERVATIVE: ScriptedStyle(aggression=0.15, looseness=0.85),
    PayoffKind.AGGRESSIVE: ScriptedStyle(aggression=0.85, looseness=0.6),
}


def scripted_policy(rules: PokerRules, kind: PayoffKind, history: History) -> np.ndarray:
    """Action probabilities of a heuristic player whose style follows *kind*."""

    state = replay(rules, history)
    if state.phase != "act":
        raise GameStructureError(f"History {history!r} is not a decision node")
    style = SCRIPTED_STYLES[PayoffKind(kind)]
    strength = hand_strength(rules, state, state.to_act)
    legal = _legal_ids(rules, state)
    if legal == (CHECK, BET):
        bet = min(max(style.aggression * (0.3 + 0.7 * strength), 0.02), 0.98)
        return np.array([1.0 - bet, bet])
    raise_prob = style.aggression * strength**2 if RAISE in legal else 0.0
    fold = (1.0 - style.looseness) * (1.0 - strength)
    call = 1.0 - raise_prob - fold
    probs = [fold, call, raise_prob] if RAISE in legal else [fold, call]
    return np.array(probs)


def history_features(rules: PokerRules, history: History) -> np.ndarray:
    """Per-round action counts and chips in big blinds, plus a showdown flag."""

    state = replay(rules, history)
    features = []
    for index in range(rules.num_rounds):
        line = state.lines[index] if index < len(state.lines) else ""
        chips = state.round_chips[index] if index < len(state.round_chips) else 0.0
        features.extend(
            [
                line.count("k"),
                line.count("b") + line.count("r"),
                line.count("c"),
                line.count("f"),
                chips / rules.ante,
            ]
        )
    showdown = state.phase == "terminal" and state.folded is None
    features.append(1.0 if showdown else 0.0)
    return np.asarray(features, dtype=float)


def observation(rules: PokerRules, history: History) -> str:
    """Observation string of the player to act: private rank, board, betting lines."""

    state = replay(rules, history)
    own = RANK_NAMES[rules.rank(state.hole[state.to_act])]
    board = f":{RANK_NAMES[rules.rank(state.board)]}" if state.board is not None else ""
    return f"{own}{board}|{'/'.join(state.lines)}"


def build_poker_game(rules: PokerRules, model: TypeModel) -> GameSpec:
    """Assemble the typed :class:`GameSpec` for *rules* under *model*."""

    deal_labels = tuple(
        Action(index, "".join(RANK_NAMES[rules.rank(card)] for card in deal))
        for index, deal in enumerate(rules.deals)
    )
    deal_probs = tuple([1.0 / len(rules.deals)] * len(rules.deals))
    minimum_pot = 2 * rules.ante
    logger.debug("building %s with %d deals under %s", rules.name, len(rules.deals), model.name)

    def legal(history: History) -> tuple[Action, ...]:
        state = replay(rules, history)
        if state.phase == "deal":
            return deal_labels
        if state.phase == "board":
            remaining = _board_cards(rules, state)
            return tuple(
                Action(index, RANK_NAMES[rules.rank(card)]) for index, card in enumerate(remaining)
            )
        if state.phase == "terminal":
            return ()
        return tuple(POKER_ACTIONS[action_id] for action_id in _legal_ids(rules, state))

    def player(history: History) -> int:
        state = replay(rules, history)
        if state.phase in ("deal", "board"):
            return CHANCE
        if state.phase == "terminal":
            raise GameStructureError(f"History {history!r} is terminal")
        return state.to_act

    def chance(history: History) -> tuple[float, ...]:
        state = replay(rules, history)
        if state.phase == "deal":
            return deal_probs
        if state.phase == "board":
            count = len(_board_cards(rules, state))
            return tuple([1.0 / count] * count)
        raise GameStructureError(f"History {history!r} is not a chance node")

    def utilities(history: History) -> np.ndarray:
        state = replay(rules, history)
        if state.phase != "terminal":
            raise GameStructureError(f"History {history!r} is not terminal")
        winner = _winner(rules, state)
        pot = PotState(tuple(state.stakes), big_blind=rules.ante, minimum_pot=minimum_pot)
        return np.stack([payoff_transform(kind, winner, pot) for kind in model.kinds], axis=1)

    def behaviour(history: History, type_id: int) -> np.ndarray:
        return scripted_policy(rules, model.kinds[type_id], history)

    def public_features(history: History) -> np.ndarray:
        state = replay(rules, history)
        return np.asarray(state.stakes, dtype=float) / rules.ante

    return GameSpec(
        name=f"{rules.name}/{model.name}",
        num_players=2,
        num_types=len(model.kinds),
        legal_actions_fn=legal,
        player_fn=player,
        chance_fn=chance,
        infoset_fn=lambda history: observation(rules, history),
        utility_fn=utilities,
        features_fn=lambda history: history_features(rules, history),
        behaviour_fn=behaviour,
        public_features_fn=public_features,
        type_labels=model.labels,
        type_prior=model.prior,
        big_blind=rules.ante,
    )


def build_kuhn(model: TypeModel | str) -> GameSpec:
    return build_poker_game(KUHN_RULES, _resolve_model(model))


def build_leduc(model: TypeModel | str) -> GameSpec:
    return build_poker_game(LEDUC_RULES, _resolve_model(model))


GAME_BUILDERS = {"kuhn": build_kuhn, "leduc": build_leduc}


def build_game(game: str, model: TypeModel | str) -> GameSpec:
    try:
        builder = GAME_BUILDERS[game]
    except KeyError as exc:
        raise ValueError(f"Unknown game {game!r}; expected one of {', '.join(GAME_BUILDERS)}") from exc
    return builder(model)


def _resolve_model(model: TypeModel | str) -> TypeModel:
    return type_model(model) if isinstance(model, str) else model
