"""Evaluation utilities for bayescfr."""

from .checksums import game_checksum, game_checksum_hex
from .exploitability import ExploitabilityReport, best_response, exploitability, to_mbbg

__all__ = [
    "ExploitabilityReport",
    "best_response",
    "exploitability",
    "game_checksum",
    "game_checksum_hex",
    "to_mbbg",
]
