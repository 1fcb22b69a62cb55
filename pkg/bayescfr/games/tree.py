"""Pre-indexed game trees built once per :class:`GameSpec`."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    CHANCE,
    CHANCE_TOLERANCE,
    TERMINAL,
    Action,
    GameSpec,
    GameStructureError,
    History,
    InfoSetKey,
)

logger = logging.getLogger(__name__)

MAX_DEPTH = 256


@dataclass(frozen=True, eq=False)
class GameTree:
    """Flat, pre-order node arrays for a finite game.

    Parents always precede their children, so forward loops propagate reach
    and reverse loops back up values.
    """

    spec: GameSpec
    histories: tuple[History, ...]
    players: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    chance_probs: tuple[np.ndarray | None, ...]
    infoset_of: tuple[int, ...]
    terminal_of: tuple[int, ...]
    terminals: tuple[int, ...]
    utilities: np.ndarray
    infoset_keys: tuple[InfoSetKey, ...]
    infoset_actions: tuple[tuple[Action, ...], ...]
    infoset_nodes: tuple[tuple[int, ...], ...]
    infoset_depth: tuple[int, ...]
    action_counts: np.ndarray
    # Last (infoset, action position) of each player on the path to a node.
    last_move: tuple[tuple[tuple[int, int] | None, ...], ...]
    infoset_parent: tuple[tuple[int, int] | None, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.histories)

    @property
    def num_infosets(self) -> int:
        return len(self.infoset_keys)

    @property
    def max_actions(self) -> int:
        return int(self.action_counts.max(initial=1))

    @property
    def infoset_player(self) -> np.ndarray:
        return np.array([key.player for key in self.infoset_keys], dtype=int)

    def infoset_index(self, key: InfoSetKey) -> int:
        try:
            return self._key_index[key]
        except KeyError as exc:
            raise GameStructureError(f"Unknown infoset {key}") from exc

    def node_index(self, history: History) -> int:
        try:
            return self._node_index[tuple(history)]
        except KeyError as exc:
            raise GameStructureError(f"History {history!r} is not in the game tree") from exc

    def player_infosets(self, player: int) -> list[int]:
        return [index for index, key in enumerate(self.infoset_keys) if key.player == player]

    def action_mask(self) -> np.ndarray:
        return np.arange(self.max_actions)[None, :] < self.action_counts[:, None]

    @functools.cached_property
    def _key_index(self) -> dict[InfoSetKey, int]:
        return {key: index for index, key in enumerate(self.infoset_keys)}

    @functools.cached_property
    def _node_index(self) -> dict[History, int]:
        return {history: index for index, history in enumerate(self.histories)}


class _TreeBuilder:
    def __init__(self, spec: GameSpec) -> None:
        self.spec = spec
        self.histories: list[History] = []
        self.players: list[int] = []
        self.children: list[tuple[int, ...]] = []
        self.chance_probs: list[np.ndarray | None] = []
        self.infoset_of: list[int] = []
        self.terminal_of: list[int] = []
        self.terminals: list[int] = []
        self.utilities: list[np.ndarray] = []
        self.last_move: list[tuple[tuple[int, int] | None, ...]] = []
        self.keys: dict[InfoSetKey, int] = {}
        self.key_list: list[InfoSetKey] = []
        self.infoset_actions: list[tuple[Action, ...]] = []
        self.infoset_nodes: list[list[int]] = []
        self.infoset_depth: list[int] = []
        self.infoset_parent: list[tuple[int, int] | None] = []

    def build(self) -> GameTree:
        spec = self.spec
        start = (None,) * spec.num_players
        self._visit(spec.root, start)
        if not self.terminals:
            raise GameStructureError(f"Game {spec.name!r} has no terminal histories")
        return GameTree(
            spec=spec,
            histories=tuple(self.histories),
            players=tuple(self.players),
            children=tuple(self.children),
            chance_probs=tuple(self.chance_probs),
            infoset_of=tuple(self.infoset_of),
            terminal_of=tuple(self.terminal_of),
            terminals=tuple(self.terminals),
            utilities=np.stack(self.utilities),
            infoset_keys=tuple(self.key_list),
            infoset_actions=tuple(self.infoset_actions),
            infoset_nodes=tuple(tuple(nodes) for nodes in self.infoset_nodes),
            infoset_depth=tuple(self.infoset_depth),
            action_counts=np.array([len(a) for a in self.infoset_actions], dtype=int),
            last_move=tuple(self.last_move),
            infoset_parent=tuple(self.infoset_parent),
        )

    def _visit(
        self,
        history: History,
        last_move: tuple[tuple[int, int] | None, ...],
    ) -> int:
        spec = self.spec
        if len(history) - len(spec.root) > MAX_DEPTH:
            raise GameStructureError(f"Game {spec.name!r} exceeds depth {MAX_DEPTH}")
        node = len(self.histories)
        self.histories.append(history)
        self.last_move.append(last_move)
        self.children.append(())
        moves = tuple(spec.legal_actions_fn(history))

        if not moves:
            values = np.asarray(spec.utility_fn(history), dtype=float)
            if values.shape != (spec.num_players, spec.num_types):
                raise GameStructureError(
                    f"Utility at {history!r} has shape {values.shape}, expected "
                    f"{(spec.num_players, spec.num_types)}"
                )
            if not np.all(np.isfinite(values)):
                raise GameStructureError(f"Utility at {history!r} is not finite")
            self.players.append(TERMINAL)
            self.chance_probs.append(None)
            self.infoset_of.append(-1)
            self.terminal_of.append(len(self.terminals))
            self.terminals.append(node)
            self.utilities.append(values)
            return node

        player = spec.player_fn(history)
        self.players.append(player)
        self.terminal_of.append(-1)
        if len({move.id for move in moves}) != len(moves):
            raise GameStructureError(f"Duplicate action ids at {history!r}")

        if player == CHANCE:
            probs = np.asarray(spec.chance_fn(history), dtype=float)
            if probs.shape != (len(moves),) or np.any(probs < 0):
                raise GameStructureError(f"Chance distribution at {history!r} is malformed")
            if abs(float(probs.sum()) - 1.0) > CHANCE_TOLERANCE:
                raise GameStructureError(f"Chance distribution at {history!r} is not normalised")
            self.chance_probs.append(probs)
            self.infoset_of.append(-1)
            kids = [self._visit(history + ((CHANCE, move.id),), last_move) for move in moves]
            self.children[node] = tuple(kids)
            return node

        if not 0 <= player < spec.num_players:
            raise GameStructureError(f"Unknown player {player} at {history!r}")
        self.chance_probs.append(None)
        key = InfoSetKey(player, spec.infoset_fn(history))
        infoset = self._register_infoset(key, moves, last_move[player], history)
        self.infoset_of.append(infoset)
        self.infoset_nodes[infoset].append(node)
        kids = []
        for position, move in enumerate(moves):
            updated = list(last_move)
            updated[player] = (infoset, position)
            kids.append(self._visit(history + ((player, move.id),), tuple(updated)))
        self.children[node] = tuple(kids)
        return node

    def _register_infoset(
        self,
        key: InfoSetKey,
        moves: tuple[Action, ...],
        parent: tuple[int, int] | None,
        history: History,
    ) -> int:
        index = self.keys.get(key)
        if index is None:
            index = len(self.key_list)
            self.keys[key] = index
            self.key_list.append(key)
            self.infoset_actions.append(moves)
            self.infoset_nodes.append([])
            self.infoset_parent.append(parent)
            depth = 0 if parent is None else self.infoset_depth[parent[0]] + 1
            self.infoset_depth.append(depth)
            return index
        if self.infoset_actions[index] != moves:
            raise GameStructureError(f"Infoset {key} has inconsistent actions at {history!r}")
        if self.infoset_parent[index] != parent:
            raise GameStructureError(f"Infoset {key} violates perfect recall at {history!r}")
        return index


@functools.lru_cache(maxsize=64)
def game_tree(spec: GameSpec) -> GameTree:
    """Build (once) and return the indexed tree of *spec*."""

    tree = _TreeBuilder(spec).build()
    logger.debug(
        "indexed %s: %d nodes, %d infosets, %d terminals",
        spec.name,
        tree.num_nodes,
        tree.num_infosets,
        len(tree.terminals),
    )
    return tree
