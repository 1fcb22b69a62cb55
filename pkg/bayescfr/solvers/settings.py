"""Validated settings shared by the tabular and deep solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..config import (
    ALGORITHMS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_HIDDEN_LAYERS,
    DEFAULT_KERNEL_WIDTH,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MEMORY_CAPACITY,
    DEFAULT_OBSERVATION_WINDOW,
    DEFAULT_REFERENCES_PER_TYPE,
    DEFAULT_TRAINING_STEPS,
    DEFAULT_TYPE_KERNEL_WIDTH,
    EXACT_SUM_TYPE_LIMIT,
)


class PosteriorMode(str, Enum):
    EXACT_SUM = "exact-sum"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class BeliefConfig:
    w: float = DEFAULT_KERNEL_WIDTH
    w_prime: float = DEFAULT_TYPE_KERNEL_WIDTH
    references_per_type: int = DEFAULT_REFERENCES_PER_TYPE
    observation_window: int = DEFAULT_OBSERVATION_WINDOW
    prior: str | tuple[float, ...] = "model"
    observations_per_iteration: int = 1
    online_references: bool = False

    def __post_init__(self) -> None:
        if self.w <= 0 or self.w_prime <= 0:
            raise ValueError("Kernel bandwidths must be positive")
        if self.references_per_type < 1 or self.observation_window < 1:
            raise ValueError("Belief sample sizes must be positive")
        if self.observations_per_iteration < 0:
            raise ValueError("Observations per iteration must be non-negative")
        if isinstance(self.prior, str) and self.prior not in ("model", "uniform"):
            raise ValueError(f"Unknown prior {self.prior!r}; expected model, uniform or a vector")


@dataclass(frozen=True)
class DeepConfig:
    hidden: tuple[int, ...] = DEFAULT_HIDDEN_LAYERS
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    steps: int = DEFAULT_TRAINING_STEPS
    strategy_steps: int | None = None
    capacity: int = DEFAULT_MEMORY_CAPACITY
    memory_policy: str = "reservoir"
    loss: str = "clamped"
    approximator: str = "network"
    type_layer: int = 0

    def __post_init__(self) -> None:
        if not self.hidden or any(width < 1 for width in self.hidden):
            raise ValueError("Hidden layer widths must be positive")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.steps < 0:
            raise ValueError("Learning rate, batch size and steps must be positive")
        if self.capacity < 1:
            raise ValueError("Memory capacity must be positive")
        if self.memory_policy not in ("reservoir", "fifo"):
            raise ValueError(f"Unknown memory policy {self.memory_policy!r}")
        if self.loss not in ("clamped", "mse"):
            raise ValueError(f"Unknown loss {self.loss!r}; expected clamped or mse")
        if self.approximator not in ("network", "table"):
            raise ValueError(f"Unknown approximator {self.approximator!r}")
        if not 0 <= self.type_layer <= len(self.hidden):
            raise ValueError(f"Type layer {self.type_layer} outside 0..{len(self.hidden)}")


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "bcfr"
    iterations: int = 1000
    traversals: int = 1
    seed: int = 0
    posterior_mode: PosteriorMode | None = None
    use_belief: bool = True
    belief: BeliefConfig = field(default_factory=BeliefConfig)
    deep: DeepConfig = field(default_factory=DeepConfig)

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"Unknown algorithm {self.algorithm!r}; expected one of {', '.join(ALGORITHMS)}"
            )
        if self.iterations < 0 or self.traversals < 1:
            raise ValueError("Iterations must be non-negative and traversals positive")
        if self.posterior_mode is not None:
            object.__setattr__(self, "posterior_mode", PosteriorMode(self.posterior_mode))

    def resolved_mode(self, num_types: int) -> PosteriorMode:
        if self.posterior_mode is not None:
            return self.posterior_mode
        if num_types <= EXACT_SUM_TYPE_LIMIT:
            return PosteriorMode.EXACT_SUM
        return PosteriorMode.SAMPLED
