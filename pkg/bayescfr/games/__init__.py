"""Game definitions: the generic extensive-form core and typed poker games."""

from .core import GameSpec, GameStructureError, InfoSetKey, collapse_types
from .poker import build_game, build_kuhn, build_leduc, standard_type_models, type_model
from .tree import GameTree, game_tree
from .values import StrategyProfile, expected_value

__all__ = [
    "GameSpec",
    "GameStructureError",
    "GameTree",
    "InfoSetKey",
    "StrategyProfile",
    "build_game",
    "build_kuhn",
    "build_leduc",
    "collapse_types",
    "expected_value",
    "game_tree",
    "standard_type_models",
    "type_model",
]
