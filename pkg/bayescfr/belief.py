"""Opponent-type posteriors from a conditional kernel density estimate.

Reference histories labelled with the type that produced them live in a
:class:`SampleBank`. The likelihood of an observed history under a type is the
kernel-weighted vote of the bank, mixing a history kernel ``K`` of width ``w``
and a type kernel ``K'`` of width ``w'``. Posteriors accumulate in log space.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .config import (
    DEFAULT_KERNEL_WIDTH,
    DEFAULT_OBSERVATION_WINDOW,
    DEFAULT_REFERENCES_PER_TYPE,
    DEFAULT_TYPE_KERNEL_WIDTH,
)
from .games.core import GameSpec, rollout_history

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-300
BELIEF_TOLERANCE = 1e-12
_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


class EstimatorUnavailableError(RuntimeError):
    """Raised when the reference bank holds no samples."""


class DegenerateKernelError(RuntimeError):
    """Raised when the type-kernel mass of the bank underflows."""


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidths and feature scaling for the conditional estimator."""

    w: float = DEFAULT_KERNEL_WIDTH
    w_prime: float = DEFAULT_TYPE_KERNEL_WIDTH
    shape: str = "gaussian"
    scaling: tuple[float, ...] | None = None
    density_normalized: bool = False

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.w_prime > 0):
            raise ValueError("Kernel bandwidths must be positive")
        if self.shape != "gaussian":
            raise ValueError(f"Unsupported kernel shape {self.shape!r}")
        if self.scaling is not None:
            scale = np.asarray(self.scaling, dtype=float)
            if scale.ndim != 1 or np.any(scale <= 0) or not np.all(np.isfinite(scale)):
                raise ValueError("Feature scaling must be finite and positive")

    def standardized(self, features: np.ndarray) -> KernelConfig:
        """Copy whose scaling is the inverse per-feature spread of *features*."""

        spread = np.asarray(features, dtype=float).std(axis=0)
        spread = np.where(spread > 0, spread, 1.0)
        return replace(self, scaling=tuple(float(x) for x in 1.0 / spread))


def kernel_eval(config: KernelConfig, distance: float | np.ndarray, bandwidth: float) -> float | np.ndarray:
    """Gaussian kernel of ``distance / bandwidth``; symmetric in the sign of *distance*."""

    values = np.abs(np.asarray(distance, dtype=float))
    if not np.all(np.isfinite(values)):
        raise ValueError("Kernel distances must be finite")
    if bandwidth <= 0:
        raise ValueError("Kernel bandwidth must be positive")
    scaled = values / bandwidth
    result = np.exp(-0.5 * scaled * scaled) / _SQRT_TWO_PI
    return float(result) if result.ndim == 0 else result


def history_distance(a: np.ndarray, b: np.ndarray, config: KernelConfig | None = None) -> float:
    """Scaled Euclidean distance between two history feature vectors."""

    left = np.asarray(a, dtype=float)
    right = np.asarray(b, dtype=float)
    if left.shape != right.shape:
        raise ValueError(f"Feature shapes differ: {left.shape} vs {right.shape}")
    diff = left - right
    if config is not None and config.scaling is not None:
        diff = diff * np.asarray(config.scaling)
    return float(np.sqrt(np.dot(diff, diff)))


def type_distance(first: int, second: int) -> float:
    return 0.0 if first == second else 1.0


@dataclass
class SampleBank:
    """Bounded reference histories per type plus a window of observations."""

    num_types: int
    references_per_type: int = DEFAULT_REFERENCES_PER_TYPE
    observation_window: int = DEFAULT_OBSERVATION_WINDOW
    _references: list[deque] = field(init=False, repr=False)
    _observations: deque = field(init=False, repr=False)
    _cache: tuple[np.ndarray, np.ndarray] | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.num_types < 1 or self.references_per_type < 1 or self.observation_window < 1:
            raise ValueError("Sample bank sizes must be positive")
        self._references = [deque(maxlen=self.references_per_type) for _ in range(self.num_types)]
        self._observations = deque(maxlen=self.observation_window)

    def add_reference(self, features: np.ndarray, type_id: int) -> None:
        if not 0 <= type_id < self.num_types:
            raise ValueError(f"Type {type_id} outside 0..{self.num_types - 1}")
        self._references[type_id].append(np.asarray(features, dtype=float))
        self._cache = None

    def add_observation(self, features: np.ndarray) -> None:
        self._observations.append(np.asarray(features, dtype=float))

    def reference_count(self, type_id: int | None = None) -> int:
        if type_id is None:
            return sum(len(bucket) for bucket in self._references)
        return len(self._references[type_id])

    @property
    def observations(self) -> list[np.ndarray]:
        return list(self._observations)

    def references(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked reference features and their type labels."""

        if self._cache is None:
            rows = [row for bucket in self._references for row in bucket]
            labels = [t for t, bucket in enumerate(self._references) for _ in bucket]
            features = np.stack(rows) if rows else np.zeros((0, 0))
            self._cache = (features, np.asarray(labels, dtype=int))
        return self._cache


def ckde_likelihoods(
    features: np.ndarray,
    bank: SampleBank,
    config: KernelConfig,
) -> np.ndarray:
    """Conditional kernel estimate of ``p(h | type)`` for every type at once."""

    references, labels = bank.references()
    if len(labels) == 0:
        raise EstimatorUnavailableError("Reference bank is empty")
    point = np.asarray(features, dtype=float)
    if point.shape != references.shape[1:]:
        raise ValueError(f"Feature shape {point.shape} does not match bank {references.shape[1:]}")
    diff = references - point
    if config.scaling is not None:
        diff = diff * np.asarray(config.scaling)
    history_kernel = kernel_eval(config, np.sqrt(np.einsum("ij,ij->i", diff, diff)), config.w)
    if config.density_normalized:
        history_kernel = history_kernel / config.w ** point.size
    same = kernel_eval(config, 0.0, config.w_prime)
    other = kernel_eval(config, 1.0, config.w_prime)

    per_type = np.bincount(labels, weights=history_kernel, minlength=bank.num_types)
    counts = np.bincount(labels, minlength=bank.num_types).astype(float)
    total_kernel = per_type.sum()
    total_count = counts.sum()
    numerators = same * per_type + other * (total_kernel - per_type)
    denominators = same * counts + other * (total_count - counts)
    if np.any(denominators < DENOMINATOR_FLOOR):
        raise DegenerateKernelError("Type-kernel mass of the reference bank underflowed")
    return numerators / denominators


def ckde_likelihood(
    features: np.ndarray,
    type_id: int,
    bank: SampleBank,
    config: KernelConfig,
) -> float:
    if not 0 <= type_id < bank.num_types:
        raise ValueError(f"Type {type_id} outside 0..{bank.num_types - 1}")
    return float(ckde_likelihoods(features, bank, config)[type_id])


def _normalize_logits(logits: np.ndarray) -> np.ndarray | None:
    if not np.any(np.isfinite(logits)):
        return None
    return np.exp(logits - logsumexp(logits))


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Posterior over types with its log-space accumulators."""

    probabilities: np.ndarray
    log_prior: np.ndarray
    log_likelihood: np.ndarray
    observations: int = 0
    stagnant: bool = False

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != 1 or np.any(probs < 0):
            raise ValueError("Belief must be a non-negative vector")
        if abs(float(probs.sum()) - 1.0) > BELIEF_TOLERANCE:
            raise ValueError("Belief must sum to one")
        object.__setattr__(self, "probabilities", probs)

    @property
    def num_types(self) -> int:
        return len(self.probabilities)

    @classmethod
    def from_prior(cls, prior: Sequence[float]) -> BeliefState:
        weights = np.asarray(prior, dtype=float)
        if weights.ndim != 1 or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("Prior must be a non-negative vector with positive mass")
        weights = weights / weights.sum()
        with np.errstate(divide="ignore"):
            log_prior = np.log(weights)
        return cls(weights, log_prior, np.zeros_like(weights))

    @classmethod
    def uniform(cls, num_types: int) -> BeliefState:
        return cls.from_prior(np.full(num_types, 1.0 / num_types))


def posterior_update(
    state: BeliefState,
    features: np.ndarray,
    bank: SampleBank,
    config: KernelConfig,
) -> BeliefState:
    """Fold one observed history into the posterior.

    When no type with prior mass explains the observation the previous
    posterior is kept and flagged as stagnant.
    """

    likelihoods = ckde_likelihoods(features, bank, config)
    with np.errstate(divide="ignore"):
        log_likelihood = state.log_likelihood + np.log(likelihoods)
    probabilities = _normalize_logits(state.log_prior + log_likelihood)
    if probabilities is None:
        logger.warning("posterior stagnated after %d observations", state.observations)
        return replace(state, stagnant=True)
    return BeliefState(
        probabilities=probabilities,
        log_prior=state.log_prior,
        log_likelihood=log_likelihood,
        observations=state.observations + 1,
    )


def batch_posterior(
    prior: Sequence[float],
    observations: Iterable[np.ndarray],
    bank: SampleBank,
    config: KernelConfig,
) -> BeliefState:
    state = BeliefState.from_prior(prior)
    for features in observations:
        state = posterior_update(state, features, bank, config)
    return state


def sample_type(state: BeliefState, rng: np.random.Generator) -> int:
    return int(rng.choice(state.num_types, p=state.probabilities))


def posterior_l1_error(
    belief: BeliefState | Sequence[float], truth: BeliefState | Sequence[float]
) -> float:
    """L1 distance between two distributions over the same types."""

    left = belief.probabilities if isinstance(belief, BeliefState) else np.asarray(belief, float)
    right = truth.probabilities if isinstance(truth, BeliefState) else np.asarray(truth, float)
    if left.shape != right.shape:
        raise ValueError(f"Distributions cover different types: {left.shape} vs {right.shape}")
    return float(np.abs(left - right).sum())


def posterior_l1(state: BeliefState | Sequence[float], true_type: int) -> float:
    probabilities = state.probabilities if isinstance(state, BeliefState) else np.asarray(state)
    truth = np.zeros(len(probabilities))
    truth[true_type] = 1.0
    return posterior_l1_error(probabilities, truth)


def fill_reference_bank(spec: GameSpec, bank: SampleBank, rng: np.random.Generator) -> None:
    """Populate every type's references with self-play rollouts of that type."""

    for type_id in range(spec.num_types):
        for _ in range(bank.references_per_type):
            history = rollout_history(spec, type_id, rng)
            bank.add_reference(spec.features_fn(history), type_id)
    logger.info("reference bank filled with %d histories", bank.reference_count())


def observe_type(spec: GameSpec, type_id: int, rng: np.random.Generator) -> np.ndarray:
    """Features of one hand played by a competitor of type *type_id*."""

    return spec.features_fn(rollout_history(spec, type_id, rng))


@dataclass(frozen=True)
class ConsistencyTrial:
    true_type: int
    l1_errors: np.ndarray


def consistency_trial(
    seed: int,
    *,
    num_types: int = 3,
    references: int = 500,
    observations: int = 200,
    separation: float = 3.0,
    config: KernelConfig | None = None,
) -> ConsistencyTrial:
    """Posterior L1 error trajectory on a synthetic Gaussian type family."""

    rng = np.random.default_rng(seed)
    means = separation * np.eye(num_types)
    bank = SampleBank(num_types, references_per_type=references, observation_window=observations)
    for type_id in range(num_types):
        for row in rng.normal(means[type_id], 1.0, size=(references, num_types)):
            bank.add_reference(row, type_id)
    kernel = (config or KernelConfig()).standardized(bank.references()[0])
    true_type = int(rng.integers(num_types))
    state = BeliefState.uniform(num_types)
    errors = np.empty(observations)
    for step, row in enumerate(rng.normal(means[true_type], 1.0, size=(observations, num_types))):
        bank.add_observation(row)
        state = posterior_update(state, row, bank, kernel)
        errors[step] = posterior_l1(state, true_type)
    return ConsistencyTrial(true_type, errors)


_BENCH_MEANS = (-1.0, 1.5)
_BENCH_SCALES = (1.0, 0.7)


def _bench_density(points: np.ndarray, type_id: int) -> np.ndarray:
    mean, scale = _BENCH_MEANS[type_id], _BENCH_SCALES[type_id]
    z = (points - mean) / scale
    return np.exp(-0.5 * z * z) / (scale * _SQRT_TWO_PI)


def ckde_convergence(
    sample_sizes: Sequence[int] = (125, 250, 500, 1000),
    *,
    seeds: int = 20,
    grid: np.ndarray | None = None,
    type_width: float = 0.25,
) -> np.ndarray:
    """Mean absolute error of the conditional density estimate per sample size.

    Each type's references are drawn from a known 1-D Gaussian; the history
    bandwidth follows Silverman's rule for the size.
    """

    points = np.linspace(-4.0, 4.0, 161) if grid is None else np.asarray(grid, dtype=float)
    errors = np.zeros(len(sample_sizes))
    for index, size in enumerate(sample_sizes):
        total = 0.0
        for seed in range(seeds):
            rng = np.random.default_rng([seed, size])
            bank = SampleBank(2, references_per_type=size)
            for type_id in range(2):
                for value in rng.normal(_BENCH_MEANS[type_id], _BENCH_SCALES[type_id], size):
                    bank.add_reference(np.array([value]), type_id)
            spread = bank.references()[0][bank.references()[1] == 0].std()
            config = KernelConfig(
                w=1.06 * spread * size ** (-0.2),
                w_prime=type_width,
                density_normalized=True,
            )
            estimate = np.array(
                [ckde_likelihood(np.array([point]), 0, bank, config) for point in points]
            )
            total += float(np.mean(np.abs(estimate - _bench_density(points, 0))))
        errors[index] = total / seeds
    return errors
