"""Regret and strategy-sum tables with regret matching and averaging rules."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class RegretMode(str, Enum):
    VANILLA = "vanilla"
    PLUS = "plus"


class Weighting(str, Enum):
    UNIFORM = "uniform"
    LINEAR = "linear"


class ModeMismatchError(RuntimeError):
    """Raised when an update rule does not match the table's regret mode."""


def _mask(action_counts: np.ndarray, max_actions: int) -> np.ndarray:
    return np.arange(max_actions)[None, :] < action_counts[:, None]


@dataclass(eq=False)
class RegretTable:
    """Cumulative regrets of shape ``(slots, infosets, max_actions)``.

    A table with one slot is pooled across types; otherwise slot ``t`` belongs
    to type ``t``.
    """

    values: np.ndarray
    action_counts: np.ndarray
    mode: RegretMode = RegretMode.VANILLA

    def __post_init__(self) -> None:
        self.mode = RegretMode(self.mode)
        self.action_counts = np.asarray(self.action_counts, dtype=int)
        if self.values.ndim != 3 or self.values.shape[1] != len(self.action_counts):
            raise ValueError("Regret table shape does not match the infoset list")

    @classmethod
    def zeros(
        cls,
        action_counts: np.ndarray,
        *,
        num_slots: int = 1,
        mode: RegretMode = RegretMode.VANILLA,
    ) -> RegretTable:
        counts = np.asarray(action_counts, dtype=int)
        max_actions = int(counts.max(initial=1))
        return cls(np.zeros((num_slots, len(counts), max_actions)), counts, mode)

    @property
    def num_slots(self) -> int:
        return self.values.shape[0]

    def slot(self, type_id: int) -> int:
        return 0 if self.num_slots == 1 else type_id

    def entry(self, type_id: int, infoset: int) -> np.ndarray:
        return self.values[self.slot(type_id), infoset, : self.action_counts[infoset]]


@dataclass(eq=False)
class StrategyTable:
    """Accumulated (reach-weighted) strategy sums."""

    sums: np.ndarray
    action_counts: np.ndarray
    weighting: Weighting = Weighting.UNIFORM

    def __post_init__(self) -> None:
        self.weighting = Weighting(self.weighting)
        self.action_counts = np.asarray(self.action_counts, dtype=int)

    @classmethod
    def zeros(
        cls,
        action_counts: np.ndarray,
        *,
        num_slots: int = 1,
        weighting: Weighting = Weighting.UNIFORM,
    ) -> StrategyTable:
        counts = np.asarray(action_counts, dtype=int)
        max_actions = int(counts.max(initial=1))
        return cls(np.zeros((num_slots, len(counts), max_actions)), counts, weighting)

    @property
    def num_slots(self) -> int:
        return self.sums.shape[0]

    def slot(self, type_id: int) -> int:
        return 0 if self.num_slots == 1 else type_id


def _match(rows: np.ndarray, mask: np.ndarray, counts: np.ndarray) -> np.ndarray:
    positive = np.maximum(rows, 0.0)
    totals = positive.sum(axis=-1, keepdims=True)
    uniform = mask / counts[..., None]
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, positive / safe, uniform)


def regret_match(table: RegretTable, type_id: int, infoset: int) -> np.ndarray:
    """Positive-part normalisation of one regret row, uniform when none is positive."""

    count = table.action_counts[infoset]
    row = table.values[table.slot(type_id), infoset]
    mask = np.arange(row.shape[0]) < count
    return _match(row, mask, np.asarray(count))[:count]


def current_strategy(table: RegretTable) -> np.ndarray:
    """Regret-matched strategies for every slot and infoset at once."""

    mask = _mask(table.action_counts, table.values.shape[2])
    return _match(table.values, mask[None], table.action_counts[None])


def _check_weight(weight: float) -> None:
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"Posterior weight {weight} outside [0, 1]")


def accumulate_vanilla(
    table: RegretTable,
    type_id: int,
    infoset: int,
    increments: Sequence[float],
    weight: float = 1.0,
) -> None:
    if table.mode is not RegretMode.VANILLA:
        raise ModeMismatchError("Vanilla accumulation on a regret-matching+ table")
    _check_weight(weight)
    table.entry(type_id, infoset)[:] += weight * np.asarray(increments, dtype=float)


def accumulate_plus(
    table: RegretTable,
    type_id: int,
    infoset: int,
    increments: Sequence[float],
    weight: float = 1.0,
) -> None:
    """Add *increments* then clamp at zero."""

    if table.mode is not RegretMode.PLUS:
        raise ModeMismatchError("Regret-matching+ accumulation on a vanilla table")
    _check_weight(weight)
    entry = table.entry(type_id, infoset)
    entry[:] = np.maximum(entry + weight * np.asarray(increments, dtype=float), 0.0)


def merge_deltas(table: RegretTable, deltas: Sequence[np.ndarray], type_id: int = 0) -> None:
    """Sum per-pass delta tables into one slot, clamping once for regret-matching+."""

    if not deltas:
        return
    total = np.sum(np.stack(deltas), axis=0)
    slot = table.values[table.slot(type_id)]
    if table.mode is RegretMode.PLUS:
        np.maximum(slot + total, 0.0, out=slot)
    else:
        slot += total


def add_strategy_weight(
    table: StrategyTable,
    type_id: int,
    infoset: int,
    strategy: np.ndarray,
    reach: float,
    iteration: int,
) -> None:
    """Add the reach-weighted strategy; linear weighting scales by the iteration."""

    scale = reach if table.weighting is Weighting.UNIFORM else iteration * reach
    count = table.action_counts[infoset]
    table.sums[table.slot(type_id), infoset, :count] += scale * strategy


def average_strategy(table: StrategyTable, type_id: int, infoset: int) -> np.ndarray:
    count = table.action_counts[infoset]
    row = table.sums[table.slot(type_id), infoset, :count]
    total = row.sum()
    if total > 0:
        return row / total
    return np.full(count, 1.0 / count)


def average_profile_table(table: StrategyTable) -> np.ndarray:
    """Normalised averages for every slot and infoset; uniform where nothing accrued."""

    mask = _mask(table.action_counts, table.sums.shape[2])
    totals = table.sums.sum(axis=-1, keepdims=True)
    uniform = (mask / table.action_counts[:, None])[None]
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, table.sums / safe, uniform)


def bandit_regret_trace(payoffs: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Average external regret of regret matching on repeated weighted payoffs.

    ``payoffs`` has shape ``(streams, steps, types, actions)`` and ``weights``
    ``(streams, steps, types)``; the per-step payoff is the weighted type sum.
    Returns the average regret ``max_a R_t(a) / t`` per stream and step.
    """

    payoffs = np.asarray(payoffs, dtype=float)
    if payoffs.ndim != 4:
        raise ValueError("Payoffs must have shape (streams, steps, types, actions)")
    streams, steps, types, actions = payoffs.shape
    if weights is None:
        weights = np.full((streams, steps, types), 1.0 / types)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (streams, steps, types):
        raise ValueError("Weights must have shape (streams, steps, types)")
    mixed = np.einsum("stk,stka->sta", weights, payoffs)
    cumulative = np.zeros((streams, actions))
    trace = np.empty((streams, steps))
    for step in range(steps):
        positive = np.maximum(cumulative, 0.0)
        totals = positive.sum(axis=1, keepdims=True)
        strategy = np.where(totals > 0, positive / np.where(totals > 0, totals, 1.0), 1.0 / actions)
        utility = mixed[:, step]
        expected = (strategy * utility).sum(axis=1, keepdims=True)
        cumulative += utility - expected
        trace[:, step] = cumulative.max(axis=1) / (step + 1)
    return trace
