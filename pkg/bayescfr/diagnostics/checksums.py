"""Checksums identifying the game a saved table belongs to."""

from __future__ import annotations

import hashlib

from ..games.core import GameSpec
from ..games.tree import game_tree


def game_checksum(spec: GameSpec) -> bytes:
    """Return a SHA256 digest of the game's infosets, actions and utilities."""

    tree = game_tree(spec)
    digest = hashlib.sha256()
    digest.update(f"{spec.num_players}:{spec.num_types}\n".encode("utf-8"))
    for key, actions in zip(tree.infoset_keys, tree.infoset_actions, strict=True):
        labels = ",".join(f"{action.id}={action.label}" for action in actions)
        digest.update(f"{key}|{labels}\n".encode("utf-8"))
    digest.update(tree.utilities.astype("<f8").tobytes())
    return digest.digest()


def game_checksum_hex(spec: GameSpec) -> str:
    return game_checksum(spec).hex()
