"""Deep Bayesian CFR: sampled traversals feeding advantage and strategy approximators."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..belief import BeliefState, KernelConfig, SampleBank, sample_type
from ..games.core import CHANCE, TERMINAL, GameSpec
from ..games.tree import GameTree, game_tree
from ..games.values import StrategyProfile
from .network import (
    Approximator,
    InfosetEncoder,
    MemoryRecord,
    NetworkApproximator,
    ReplayMemory,
    TableApproximator,
    initialize_network,
    reservoir_insert,
)
from .settings import SolverConfig
from .tabular import (
    BELIEF_STREAM,
    NETWORK_STREAM,
    TRAVERSAL_STREAM,
    build_reference_bank,
    draw_competitor_type,
    learns_posterior,
    observe_competitor,
    resolve_prior,
    seed_streams,
)

logger = logging.getLogger(__name__)

# Spawn-key root for strategy fits; the shared streams use 0..3.
STRATEGY_STREAM = 4


def _regret_match(advantages: np.ndarray) -> np.ndarray:
    positive = np.maximum(advantages, 0.0)
    total = positive.sum()
    if total > 0:
        return positive / total
    return np.full(len(advantages), 1.0 / len(advantages))


@dataclass(eq=False)
class DeepState:
    spec: GameSpec
    tree: GameTree
    config: SolverConfig
    encoder: InfosetEncoder
    advantages: list[Approximator]
    strategy: Approximator
    advantage_memories: list[ReplayMemory]
    strategy_memory: ReplayMemory
    belief: BeliefState
    competitor_type: int
    rng: np.random.Generator
    belief_rng: np.random.Generator
    network_rng: np.random.Generator
    bank: SampleBank | None = None
    kernel: KernelConfig | None = None
    iteration: int = 0
    losses: list[float] = field(default_factory=list)


def _make_approximator(
    encoder: InfosetEncoder, tree: GameTree, config: SolverConfig, rng: np.random.Generator
) -> Approximator:
    if config.deep.approximator == "table":
        return TableApproximator(tree.max_actions, loss=config.deep.loss)
    net = initialize_network(
        encoder.width, tree.max_actions, config.deep, rng, type_width=encoder.num_types
    )
    return NetworkApproximator(net, config.deep)


def init_deep_state(
    spec: GameSpec, config: SolverConfig, *, competitor_type: int | None = None
) -> DeepState:
    tree = game_tree(spec)
    encoder = InfosetEncoder(tree, spec.num_types)
    streams = seed_streams(config.seed)
    network_rng = streams[NETWORK_STREAM]
    advantages = [
        _make_approximator(encoder, tree, config, network_rng) for _ in range(spec.num_players)
    ]
    strategy = _make_approximator(encoder, tree, config, network_rng)
    if competitor_type is None:
        competitor_type = draw_competitor_type(spec, config.seed)
    prior = resolve_prior(spec, config.belief.prior)
    memory_args = {"capacity": config.deep.capacity, "policy": config.deep.memory_policy}
    state = DeepState(
        spec=spec,
        tree=tree,
        config=config,
        encoder=encoder,
        advantages=advantages,
        strategy=strategy,
        advantage_memories=[ReplayMemory(**memory_args) for _ in range(spec.num_players)],
        strategy_memory=ReplayMemory(**memory_args),
        belief=BeliefState.from_prior(prior),
        competitor_type=competitor_type,
        rng=streams[TRAVERSAL_STREAM],
        belief_rng=streams[BELIEF_STREAM],
        network_rng=network_rng,
    )
    if learns_posterior(spec, config, prior):
        if prior[competitor_type] <= 0:
            raise ValueError("Competitor type has zero prior mass; the posterior cannot reach it")
        state.bank, state.kernel = build_reference_bank(spec, config, state.belief_rng)
    return state


def _choose(probs: np.ndarray, rng: np.random.Generator) -> int:
    return int(rng.choice(len(probs), p=probs))


def deep_bcfr_traverse(
    state: DeepState,
    node: int,
    player: int,
    type_id: int,
    weight: float,
) -> float:
    """External-sampling walk recording weighted advantages and opponent strategies."""

    tree = state.tree
    acting = tree.players[node]
    if acting == TERMINAL:
        return float(tree.utilities[tree.terminal_of[node], player, type_id])
    children = tree.children[node]
    if acting == CHANCE:
        child = children[_choose(tree.chance_probs[node], state.rng)]
        return deep_bcfr_traverse(state, child, player, type_id, weight)
    infoset = tree.infoset_of[node]
    count = int(tree.action_counts[infoset])
    encoding = state.encoder.encode(infoset, type_id)
    sigma = _regret_match(state.advantages[acting].predict(encoding)[:count])
    mask = np.zeros(tree.max_actions)
    mask[:count] = 1.0
    iteration = state.iteration + 1
    if acting == player:
        values = np.array(
            [deep_bcfr_traverse(state, child, player, type_id, weight) for child in children]
        )
        node_value = float(sigma @ values)
        target = np.zeros(tree.max_actions)
        target[:count] = weight * (values - node_value)
        record = MemoryRecord(encoding, iteration, target, mask)
        reservoir_insert(state.advantage_memories[player], record, state.network_rng)
        return node_value
    padded = np.zeros(tree.max_actions)
    padded[:count] = sigma
    record = MemoryRecord(encoding, iteration, padded, mask)
    reservoir_insert(state.strategy_memory, record, state.network_rng)
    child = children[_choose(sigma, state.rng)]
    return deep_bcfr_traverse(state, child, player, type_id, weight)


def deep_bcfr_iterate(state: DeepState) -> DeepState:
    """Sample a type, walk each player, refit each advantage approximator, observe."""

    type_id = sample_type(state.belief, state.rng)
    weight = float(state.belief.probabilities[type_id])
    for player in range(state.spec.num_players):
        for _ in range(state.config.traversals):
            deep_bcfr_traverse(state, 0, player, type_id, weight)
        loss = state.advantages[player].fit(state.advantage_memories[player], state.network_rng)
        state.losses.append(loss)
    observe_competitor(state)
    state.iteration += 1
    logger.debug("deep iteration %d: type %d, weight %.4f", state.iteration, type_id, weight)
    return state


def strategy_rng(state: DeepState) -> np.random.Generator:
    """Generator for the strategy fit at the current iteration, apart from training draws."""

    key = (STRATEGY_STREAM, state.iteration)
    return np.random.default_rng(np.random.SeedSequence(state.config.seed, spawn_key=key))


def fit_strategy(state: DeepState, approximator: Approximator | None = None) -> float:
    model = approximator or state.strategy
    steps = state.config.deep.strategy_steps
    return model.fit(state.strategy_memory, strategy_rng(state), steps)


def snapshot_profile(state: DeepState) -> StrategyProfile:
    """Profile of a strategy fit on a copy; training state and generators are left alone."""

    model = copy.deepcopy(state.strategy)
    fit_strategy(state, model)
    return extract_profile(state, model)


def extract_profile(state: DeepState, approximator: Approximator | None = None) -> StrategyProfile:
    """Typed profile from the strategy approximator, normalised over legal actions."""

    model = approximator or state.strategy
    tree = state.tree
    table = np.zeros((state.spec.num_types, tree.num_infosets, tree.max_actions))
    for type_id in range(state.spec.num_types):
        outputs = model.predict(state.encoder.encode_all(type_id))
        for infoset in range(tree.num_infosets):
            count = tree.action_counts[infoset]
            table[type_id, infoset, :count] = _regret_match(outputs[infoset, :count])
    return StrategyProfile.from_table(tree, table)


@dataclass(frozen=True)
class DeepResult:
    state: DeepState
    profile: StrategyProfile


def deep_bcfr_run(
    spec: GameSpec,
    config: SolverConfig,
    *,
    competitor_type: int | None = None,
    callback: Callable[[DeepState], None] | None = None,
) -> DeepResult:
    """Train for ``config.iterations`` iterations then fit the strategy approximator."""

    if config.algorithm != "deep-bcfr":
        raise ValueError(f"deep_bcfr_run trains deep-bcfr, not {config.algorithm}")
    state = init_deep_state(spec, config, competitor_type=competitor_type)
    for _ in range(config.iterations):
        deep_bcfr_iterate(state)
        if callback is not None:
            callback(state)
    fit_strategy(state)
    return DeepResult(state, extract_profile(state))
