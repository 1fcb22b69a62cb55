"""Function approximators, replay memories and infoset encodings for deep BCFR."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
import torch
from torch import nn

from ..config import GRADIENT_CLIP_NORM
from ..games.core import InfoSetKey
from ..games.tree import GameTree
from .settings import DeepConfig

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Raised when a training step produces a non-finite loss or gradient."""


class AdvantageNet(nn.Module):
    """Feed-forward ReLU network with the type one-hot joined at a chosen layer.

    Inputs carry the type block in their last ``type_width`` columns; it is
    concatenated to the input of layer ``type_layer`` (0 is the network input).
    """

    def __init__(
        self,
        input_size: int,
        num_actions: int,
        hidden: Sequence[int] = (64, 64),
        *,
        type_width: int = 0,
        type_layer: int = 0,
    ) -> None:
        super().__init__()
        if not 0 <= type_layer <= len(hidden):
            raise ValueError(f"Type layer {type_layer} outside 0..{len(hidden)}")
        self.type_width = type_width
        self.type_layer = type_layer
        widths = [input_size - type_width, *hidden, num_actions]
        self.layers = nn.ModuleList()
        for index, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            extra = type_width if index == type_layer else 0
            self.layers.append(nn.Linear(fan_in + extra, fan_out))

    @property
    def layer_sizes(self) -> list[tuple[int, int]]:
        return [(layer.in_features, layer.out_features) for layer in self.layers]

    def forward(self, inputs: torch.Tensor) -> torch.Tensor:
        if self.type_width:
            hidden, types = inputs[..., : -self.type_width], inputs[..., -self.type_width :]
        else:
            hidden, types = inputs, None
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            if types is not None and index == self.type_layer:
                hidden = torch.cat([hidden, types], dim=-1)
            hidden = layer(hidden)
            if index < last:
                hidden = torch.relu(hidden)
        return hidden


def initialize_network(
    input_size: int,
    num_actions: int,
    config: DeepConfig,
    rng: np.random.Generator,
    *,
    type_width: int = 0,
) -> AdvantageNet:
    """He-initialised hidden layers and a zero output layer, drawn from *rng*."""

    net = AdvantageNet(
        input_size,
        num_actions,
        config.hidden,
        type_width=type_width,
        type_layer=config.type_layer,
    ).double()
    last = len(net.layers) - 1
    with torch.no_grad():
        for index, layer in enumerate(net.layers):
            if index == last:
                layer.weight.zero_()
            else:
                scale = np.sqrt(2.0 / layer.in_features)
                weights = rng.normal(0.0, scale, size=tuple(layer.weight.shape))
                layer.weight.copy_(torch.from_numpy(weights))
            layer.bias.zero_()
    return net


def predict(net: nn.Module, inputs: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        tensor = torch.as_tensor(np.asarray(inputs, dtype=np.float64))
        return net(tensor).numpy()


@dataclass(frozen=True)
class MemoryRecord:
    encoding: np.ndarray
    iteration: int
    target: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class MemoryBatch:
    encodings: np.ndarray
    iterations: np.ndarray
    targets: np.ndarray
    masks: np.ndarray

    def __len__(self) -> int:
        return len(self.iterations)


@dataclass
class ReplayMemory:
    """Bounded sample store with reservoir or first-in-first-out eviction."""

    capacity: int
    policy: str = "reservoir"
    records: list[MemoryRecord] = field(default_factory=list)
    insertions: int = 0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("Memory capacity must be positive")
        if self.policy not in ("reservoir", "fifo"):
            raise ValueError(f"Unknown memory policy {self.policy!r}")

    def __len__(self) -> int:
        return len(self.records)

    def as_batch(self) -> MemoryBatch:
        return _stack(self.records)


def reservoir_insert(memory: ReplayMemory, record: MemoryRecord, rng: np.random.Generator) -> None:
    """Insert so that every record seen so far is retained with equal probability."""

    memory.insertions += 1
    if len(memory.records) < memory.capacity:
        memory.records.append(record)
        return
    if memory.policy == "fifo":
        memory.records[(memory.insertions - 1) % memory.capacity] = record
        return
    slot = int(rng.integers(memory.insertions))
    if slot < memory.capacity:
        memory.records[slot] = record


def _stack(records: Sequence[MemoryRecord]) -> MemoryBatch:
    return MemoryBatch(
        encodings=np.stack([r.encoding for r in records]),
        iterations=np.array([r.iteration for r in records], dtype=float),
        targets=np.stack([r.target for r in records]),
        masks=np.stack([r.mask for r in records]),
    )


def sample_batch(memory: ReplayMemory, size: int, rng: np.random.Generator) -> MemoryBatch:
    if not memory.records:
        raise ValueError("Cannot sample from an empty memory")
    if size >= len(memory.records):
        return _stack(memory.records)
    picks = rng.choice(len(memory.records), size=size, replace=False)
    return _stack([memory.records[int(index)] for index in np.sort(picks)])


def clamped_targets(target_net: nn.Module, batch: MemoryBatch) -> np.ndarray:
    """``max(old_prediction + sampled, 0)`` on legal actions, zero elsewhere."""

    previous = predict(target_net, batch.encodings)
    return np.maximum(previous + batch.targets, 0.0) * batch.masks


def train_step(
    net: nn.Module,
    optimizer: torch.optim.Optimizer,
    batch: MemoryBatch,
    *,
    loss: str = "clamped",
    target_net: nn.Module | None = None,
    clip: float = GRADIENT_CLIP_NORM,
) -> float:
    """One gradient step on a sampled batch; returns the loss before the step.

    ``clamped`` regresses onto targets built once from *target_net*;
    ``mse`` regresses onto the raw samples weighted by their iteration.
    """

    if loss == "clamped":
        targets = clamped_targets(target_net if target_net is not None else net, batch)
        weights = np.ones(len(batch))
    elif loss == "mse":
        targets = batch.targets * batch.masks
        weights = batch.iterations / batch.iterations.mean()
    else:
        raise ValueError(f"Unknown loss {loss!r}")
    inputs = torch.as_tensor(batch.encodings, dtype=torch.float64)
    target_tensor = torch.as_tensor(targets, dtype=torch.float64)
    mask = torch.as_tensor(batch.masks, dtype=torch.float64)
    weight_tensor = torch.as_tensor(weights, dtype=torch.float64)[:, None]

    optimizer.zero_grad()
    output = net(inputs)
    value = torch.mean(weight_tensor * mask * (output - target_tensor) ** 2)
    if not torch.isfinite(value):
        raise TrainingDivergedError(f"Non-finite loss {value.item()}")
    value.backward()
    norm = torch.nn.utils.clip_grad_norm_(net.parameters(), clip)
    if not torch.isfinite(norm):
        raise TrainingDivergedError(f"Non-finite gradient norm {norm.item()}")
    optimizer.step()
    return float(value.item())


class Approximator(Protocol):
    def predict(self, inputs: np.ndarray) -> np.ndarray: ...

    def fit(
        self, memory: ReplayMemory, rng: np.random.Generator, steps: int | None = None
    ) -> float: ...


class NetworkApproximator:
    """A network trained by SGD with gradient-norm clipping."""

    def __init__(self, net: AdvantageNet, config: DeepConfig) -> None:
        self.net = net
        self.config = config
        self.optimizer = torch.optim.SGD(net.parameters(), lr=config.learning_rate)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return predict(self.net, inputs)

    def fit(self, memory: ReplayMemory, rng: np.random.Generator, steps: int | None = None) -> float:
        if not memory.records:
            return 0.0
        target = copy.deepcopy(self.net) if self.config.loss == "clamped" else None
        last = 0.0
        for _ in range(self.config.steps if steps is None else steps):
            batch = sample_batch(memory, self.config.batch_size, rng)
            last = train_step(self.net, self.optimizer, batch, loss=self.config.loss, target_net=target)
        logger.debug("fit %d records, final %s loss %.6g", len(memory.records), self.config.loss, last)
        return last


class TableApproximator:
    """Exact per-encoding fit of the same targets, used as an oracle."""

    def __init__(self, num_actions: int, loss: str = "clamped") -> None:
        self.num_actions = num_actions
        self.loss = loss
        self.table: dict[bytes, np.ndarray] = {}

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        zero = np.zeros(self.num_actions)
        result = np.stack([self.table.get(row.tobytes(), zero) for row in rows])
        return result if np.ndim(inputs) > 1 else result[0]

    def fit(self, memory: ReplayMemory, rng: np.random.Generator, steps: int | None = None) -> float:
        if not memory.records:
            return 0.0
        batch = memory.as_batch()
        if self.loss == "clamped":
            targets = np.maximum(self.predict(batch.encodings) + batch.targets, 0.0) * batch.masks
            weights = np.ones(len(batch))
        else:
            targets = batch.targets * batch.masks
            weights = batch.iterations
        sums: dict[bytes, np.ndarray] = {}
        totals: dict[bytes, float] = {}
        for row, target, weight in zip(batch.encodings, targets, weights, strict=True):
            key = np.asarray(row, dtype=np.float64).tobytes()
            sums[key] = sums.get(key, 0.0) + weight * target
            totals[key] = totals.get(key, 0.0) + weight
        previous = self.predict(batch.encodings)
        self.table = {key: sums[key] / totals[key] for key in sums}
        return float(np.mean((previous - targets) ** 2))


class InfosetEncoder:
    """Fixed-width encoding: private token, betting line, seat, stakes, type."""

    def __init__(self, tree: GameTree, num_types: int) -> None:
        self.tree = tree
        self.num_types = num_types
        splits = [key.observation.split("|", 1) for key in tree.infoset_keys]
        self.private_tokens = sorted({private for private, _ in splits})
        self.line_tokens = sorted({line for _, line in splits})
        players = tree.spec.num_players
        stakes = self._stakes()
        self._scale = max(float(stakes.max(initial=1.0)), 1.0)
        blocks = []
        for index, (private, line) in enumerate(splits):
            row = np.zeros(len(self.private_tokens) + len(self.line_tokens) + players)
            row[self.private_tokens.index(private)] = 1.0
            row[len(self.private_tokens) + self.line_tokens.index(line)] = 1.0
            row[len(self.private_tokens) + len(self.line_tokens) + tree.infoset_keys[index].player] = 1.0
            blocks.append(np.concatenate([row, stakes[index] / self._scale]))
        self._base = np.stack(blocks)

    def _stakes(self) -> np.ndarray:
        spec = self.tree.spec
        rows = []
        for nodes in self.tree.infoset_nodes:
            history = self.tree.histories[nodes[0]]
            if spec.public_features_fn is None:
                rows.append(np.zeros(0))
            else:
                rows.append(np.asarray(spec.public_features_fn(history), dtype=float))
        return np.stack(rows)

    @property
    def width(self) -> int:
        return self._base.shape[1] + self.num_types

    def encode(self, infoset: int, type_id: int) -> np.ndarray:
        types = np.zeros(self.num_types)
        types[type_id] = 1.0
        return np.concatenate([self._base[infoset], types])

    def encode_all(self, type_id: int) -> np.ndarray:
        types = np.zeros((self.tree.num_infosets, self.num_types))
        types[:, type_id] = 1.0
        return np.concatenate([self._base, types], axis=1)

    def decode(self, vector: np.ndarray) -> tuple[InfoSetKey, int]:
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.width,):
            raise ValueError(f"Encoding has width {vector.shape}, expected {self.width}")
        base, types = vector[: -self.num_types], vector[-self.num_types :]
        matches = np.flatnonzero(np.all(np.isclose(self._base, base), axis=1))
        if len(matches) != 1:
            raise ValueError("Encoding does not identify a unique infoset")
        return self.tree.infoset_keys[int(matches[0])], int(np.argmax(types))
