"""Tabular counterfactual regret solvers.

Every algorithm shares one traversal engine whose values are vectors over a
selection of type columns; regret increments are the posterior-weighted sum
of those columns. Baselines (``cfr``, ``cfr+``, ``mccfr-ext``) run on a
single-type game, typically one produced by :func:`collapse_types`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from ..belief import (
    BeliefState,
    KernelConfig,
    SampleBank,
    fill_reference_bank,
    observe_type,
    posterior_update,
    sample_type,
)
from ..config import BASELINE_ALGORITHMS
from ..games.core import CHANCE, TERMINAL, GameSpec, GameStructureError, History
from ..games.tree import GameTree, game_tree
from ..games.values import StrategyProfile
from .regret import (
    RegretMode,
    RegretTable,
    StrategyTable,
    Weighting,
    add_strategy_weight,
    average_profile_table,
    current_strategy,
    merge_deltas,
)
from .settings import PosteriorMode, SolverConfig

logger = logging.getLogger(__name__)

TRAVERSAL_STREAM, COMPETITOR_STREAM, BELIEF_STREAM, NETWORK_STREAM = range(4)
PLUS_ALGORITHMS = ("cfr+", "bcfr+")
POSTERIOR_ALGORITHMS = ("bcfr", "bcfr+", "deep-bcfr")

Chooser = Callable[[int, np.ndarray], int]


def seed_streams(seed: int) -> list[np.random.Generator]:
    """Independent generators for traversal, competitor, belief and network draws."""

    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(4)]


def draw_competitor_type(spec: GameSpec, seed: int) -> int:
    """The competitor's hidden type for *seed*, drawn from the game's type prior."""

    prior = spec.type_prior or tuple([1.0 / spec.num_types] * spec.num_types)
    rng = seed_streams(seed)[COMPETITOR_STREAM]
    return int(rng.choice(spec.num_types, p=np.asarray(prior)))


def resolve_prior(spec: GameSpec, prior: str | Sequence[float]) -> np.ndarray:
    if isinstance(prior, str):
        if prior == "uniform" or spec.type_prior is None:
            return np.full(spec.num_types, 1.0 / spec.num_types)
        return np.asarray(spec.type_prior, dtype=float)
    weights = np.asarray(prior, dtype=float)
    if weights.shape != (spec.num_types,) or np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError(f"Prior must be a non-negative vector of {spec.num_types} entries")
    return weights / weights.sum()


@dataclass(eq=False)
class SolverState:
    spec: GameSpec
    tree: GameTree
    config: SolverConfig
    mode: PosteriorMode
    regrets: RegretTable
    strategy: StrategyTable
    belief: BeliefState
    competitor_type: int
    rng: np.random.Generator
    belief_rng: np.random.Generator
    bank: SampleBank | None = None
    kernel: KernelConfig | None = None
    iteration: int = 0
    tracker: Any = None

    @property
    def algorithm(self) -> str:
        return self.config.algorithm


def init_state(
    spec: GameSpec,
    config: SolverConfig,
    *,
    competitor_type: int | None = None,
) -> SolverState:
    """Fresh tables, belief and generators for *config* on *spec*."""

    algorithm = config.algorithm
    if algorithm == "deep-bcfr":
        raise ValueError("deep-bcfr is trained with solvers.deep.deep_bcfr_run")
    if algorithm in BASELINE_ALGORITHMS and spec.num_types != 1:
        raise ValueError(f"{algorithm} solves single-type games; collapse the types first")
    tree = game_tree(spec)
    slots = spec.num_types if algorithm == "cig" else 1
    plus = algorithm in PLUS_ALGORITHMS
    regrets = RegretTable.zeros(
        tree.action_counts,
        num_slots=slots,
        mode=RegretMode.PLUS if plus else RegretMode.VANILLA,
    )
    strategy = StrategyTable.zeros(
        tree.action_counts,
        num_slots=slots,
        weighting=Weighting.LINEAR if plus else Weighting.UNIFORM,
    )
    if competitor_type is None:
        competitor_type = draw_competitor_type(spec, config.seed)
    if not 0 <= competitor_type < spec.num_types:
        raise GameStructureError(f"Competitor type {competitor_type} outside the type space")

    prior = resolve_prior(spec, config.belief.prior)
    belief = BeliefState.from_prior(prior)
    streams = seed_streams(config.seed)
    state = SolverState(
        spec=spec,
        tree=tree,
        config=config,
        mode=config.resolved_mode(spec.num_types),
        regrets=regrets,
        strategy=strategy,
        belief=belief,
        competitor_type=competitor_type,
        rng=streams[TRAVERSAL_STREAM],
        belief_rng=streams[BELIEF_STREAM],
    )
    if learns_posterior(spec, config, prior):
        if prior[competitor_type] <= 0:
            raise ValueError("Competitor type has zero prior mass; the posterior cannot reach it")
        state.bank, state.kernel = build_reference_bank(spec, config, state.belief_rng)
    logger.info(
        "initialised %s on %s: %d infosets, mode %s, competitor type %d",
        algorithm,
        spec.name,
        tree.num_infosets,
        state.mode.value,
        competitor_type,
    )
    return state


def learns_posterior(spec: GameSpec, config: SolverConfig, prior: np.ndarray) -> bool:
    if config.algorithm not in POSTERIOR_ALGORITHMS or not config.use_belief:
        return False
    if spec.num_types < 2 or spec.features_fn is None or spec.behaviour_fn is None:
        return False
    # A point-mass prior can never move.
    return int(np.count_nonzero(prior)) > 1


def build_reference_bank(
    spec: GameSpec, config: SolverConfig, rng: np.random.Generator
) -> tuple[SampleBank, KernelConfig]:
    settings = config.belief
    bank = SampleBank(
        spec.num_types,
        references_per_type=settings.references_per_type,
        observation_window=settings.observation_window,
    )
    fill_reference_bank(spec, bank, rng)
    kernel = KernelConfig(w=settings.w, w_prime=settings.w_prime).standardized(
        bank.references()[0]
    )
    return bank, kernel


class _Pass(NamedTuple):
    type_id: int
    columns: slice
    weights: np.ndarray
    sample_chance: bool = False


def _mix(sigma: np.ndarray, child_values: np.ndarray) -> np.ndarray:
    # Left-to-right sum: a single type column equals its collapsed game bit for bit.
    total = sigma[0] * child_values[0]
    for position in range(1, len(sigma)):
        total = total + sigma[position] * child_values[position]
    return total


def _sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(index, len(probs) - 1)


class _Walker:
    """One traversal for one player over fixed current strategies."""

    def __init__(
        self,
        state: SolverState,
        sigma: np.ndarray,
        player: int,
        scheme: _Pass,
        iteration: int,
        *,
        chooser: Chooser | None = None,
        update_strategy: bool = True,
    ) -> None:
        tree = state.tree
        self.tree = tree
        self.player = player
        self.sigma = sigma
        self.weights = scheme.weights
        self.type_id = scheme.type_id
        self.iteration = iteration
        self.strategy = state.strategy if update_strategy else None
        self.values = tree.utilities[:, player, scheme.columns]
        self.delta = np.zeros((tree.num_infosets, tree.max_actions))
        self.chooser = chooser
        self.rng = state.rng
        self.sample_chance = scheme.sample_chance
        self.visited_terminals: list[int] = []

    def _choose(self, node: int, probs: np.ndarray) -> int:
        if self.chooser is not None:
            return self.chooser(node, probs)
        return _sample_index(probs, self.rng)

    def full(self, node: int, reach_own: float, reach_opp: float) -> np.ndarray:
        """Counterfactual walk enumerating decisions; chance optionally sampled."""

        tree = self.tree
        acting = tree.players[node]
        if acting == TERMINAL:
            self.visited_terminals.append(node)
            return self.values[tree.terminal_of[node]]
        children = tree.children[node]
        if acting == CHANCE:
            probs = tree.chance_probs[node]
            if self.sample_chance:
                return self.full(children[self._choose(node, probs)], reach_own, reach_opp)
            total = 0.0
            for position, child in enumerate(children):
                p = probs[position]
                total = total + p * self.full(child, reach_own, reach_opp * p)
            return total
        infoset = tree.infoset_of[node]
        count = tree.action_counts[infoset]
        sigma = self.sigma[infoset, :count]
        if acting == self.player:
            child_values = np.stack(
                [self.full(child, reach_own * sigma[a], reach_opp) for a, child in enumerate(children)]
            )
            node_value = _mix(sigma, child_values)
            self.delta[infoset, :count] += reach_opp * ((child_values - node_value) @ self.weights)
            if self.strategy is not None:
                add_strategy_weight(
                    self.strategy, self.type_id, infoset, sigma, reach_own, self.iteration
                )
            return node_value
        total = 0.0
        for position, child in enumerate(children):
            p = sigma[position]
            total = total + p * self.full(child, reach_own, reach_opp * p)
        return total

    def external(self, node: int) -> np.ndarray:
        """External-sampling walk: chance and opponents sampled, player enumerated."""

        tree = self.tree
        acting = tree.players[node]
        if acting == TERMINAL:
            return self.values[tree.terminal_of[node]]
        children = tree.children[node]
        if acting == CHANCE:
            return self.external(children[self._choose(node, tree.chance_probs[node])])
        infoset = tree.infoset_of[node]
        count = tree.action_counts[infoset]
        sigma = self.sigma[infoset, :count]
        if acting == self.player:
            child_values = np.stack([self.external(child) for child in children])
            node_value = sigma @ child_values
            self.delta[infoset, :count] += (child_values - node_value) @ self.weights
            return node_value
        if self.strategy is not None:
            add_strategy_weight(self.strategy, self.type_id, infoset, sigma, 1.0, self.iteration)
        return self.external(children[self._choose(node, sigma)])


def _slot_sigma(state: SolverState, sigma: np.ndarray, type_id: int) -> np.ndarray:
    return sigma[state.regrets.slot(type_id)]


def _run_passes(state: SolverState, schemes: Sequence[_Pass], *, alternating: bool) -> None:
    iteration = state.iteration + 1
    players = range(state.spec.num_players)
    if alternating:
        for player in players:
            sigma = current_strategy(state.regrets)
            for scheme in schemes:
                delta = _traverse(state, sigma, player, scheme, iteration)
                merge_deltas(state.regrets, [delta], scheme.type_id)
        return
    sigma = current_strategy(state.regrets)
    pending = [
        (scheme.type_id, _traverse(state, sigma, player, scheme, iteration))
        for player in players
        for scheme in schemes
    ]
    for type_id, delta in pending:
        merge_deltas(state.regrets, [delta], type_id)


def _traverse(
    state: SolverState, sigma: np.ndarray, player: int, scheme: _Pass, iteration: int
) -> np.ndarray:
    slot_sigma = _slot_sigma(state, sigma, scheme.type_id)
    if state.tracker is not None and not scheme.sample_chance:
        state.tracker.record(player, slot_sigma, scheme.weights)
    walker = _Walker(state, slot_sigma, player, scheme, iteration)
    walker.full(0, 1.0, 1.0)
    if scheme.sample_chance and state.config.belief.online_references and state.bank is not None:
        for node in walker.visited_terminals:
            history = state.tree.histories[node]
            state.bank.add_reference(state.spec.features_fn(history), scheme.type_id)
    return walker.delta


def _single_type_scheme(state: SolverState) -> list[_Pass]:
    if state.spec.num_types != 1:
        raise ValueError(f"{state.algorithm} needs a single-type game")
    return [_Pass(0, slice(None), np.ones(1))]


def cfr_iterate(state: SolverState) -> SolverState:
    """One vanilla CFR iteration: simultaneous updates, uniform averaging."""

    _run_passes(state, _single_type_scheme(state), alternating=False)
    return _finish_iteration(state)


def cfr_plus_iterate(state: SolverState) -> SolverState:
    """One CFR+ iteration: alternating updates, clamped regrets, linear averaging."""

    _run_passes(state, _single_type_scheme(state), alternating=True)
    return _finish_iteration(state)


def _bayesian_iterate(state: SolverState, *, alternating: bool) -> SolverState:
    weights = state.belief.probabilities
    if state.mode is PosteriorMode.EXACT_SUM:
        _run_passes(state, [_Pass(0, slice(None), weights)], alternating=alternating)
    else:
        for _ in range(state.config.traversals):
            type_id = sample_type(state.belief, state.rng)
            scheme = _Pass(type_id, slice(type_id, type_id + 1), weights[type_id : type_id + 1], True)
            _run_passes(state, [scheme], alternating=alternating)
    observe_competitor(state)
    return _finish_iteration(state)


def bcfr_iterate(state: SolverState) -> SolverState:
    """One Bayesian CFR iteration with posterior-weighted regret increments."""

    return _bayesian_iterate(state, alternating=False)


def bcfr_plus_iterate(state: SolverState) -> SolverState:
    """Bayesian CFR with regret-matching+, alternating updates and linear averaging."""

    return _bayesian_iterate(state, alternating=True)


def cig_iterate(state: SolverState) -> SolverState:
    """Complete-information baseline: one independent CFR per type slot."""

    schemes = [
        _Pass(type_id, slice(type_id, type_id + 1), np.ones(1))
        for type_id in range(state.spec.num_types)
    ]
    _run_passes(state, schemes, alternating=False)
    return _finish_iteration(state)


def mccfr_external_iterate(state: SolverState) -> SolverState:
    """External-sampling MCCFR: ``traversals`` sampled walks per player."""

    scheme = _single_type_scheme(state)[0]
    iteration = state.iteration + 1
    for player in range(state.spec.num_players):
        for _ in range(state.config.traversals):
            sigma = current_strategy(state.regrets)[0]
            walker = _Walker(state, sigma, player, scheme, iteration)
            walker.external(0)
            merge_deltas(state.regrets, [walker.delta], 0)
    return _finish_iteration(state)


def external_sampling_increment(
    state: SolverState, player: int, chooser: Chooser | None = None
) -> np.ndarray:
    """Regret increment of one external-sampling walk, leaving *state* untouched."""

    scheme = _single_type_scheme(state)[0]
    sigma = current_strategy(state.regrets)[0]
    walker = _Walker(
        state, sigma, player, scheme, state.iteration + 1, chooser=chooser, update_strategy=False
    )
    walker.external(0)
    return walker.delta


def full_tree_increment(state: SolverState, player: int) -> np.ndarray:
    """Exact counterfactual regret increment of one full pass, leaving *state* untouched."""

    scheme = _Pass(0, slice(None), _current_weights(state))
    sigma = current_strategy(state.regrets)[0]
    walker = _Walker(state, sigma, player, scheme, state.iteration + 1, update_strategy=False)
    walker.full(0, 1.0, 1.0)
    return walker.delta


def _current_weights(state: SolverState) -> np.ndarray:
    if state.spec.num_types == 1:
        return np.ones(1)
    return state.belief.probabilities


def bcfr_traverse(
    state: SolverState,
    history: History,
    player: int,
    type_id: int,
    reach_own: float = 1.0,
    reach_opp: float = 1.0,
    *,
    weight: float | None = None,
) -> tuple[float, np.ndarray]:
    """Sampled-type walk from *history* returning its value and regret delta.

    The delta is weighted by the posterior mass of *type_id* unless an explicit
    *weight* is given; the state's tables are not modified.
    """

    if not 0 <= type_id < state.spec.num_types:
        raise GameStructureError(f"Type {type_id} outside the type space")
    mass = state.belief.probabilities[type_id] if weight is None else weight
    scheme = _Pass(type_id, slice(type_id, type_id + 1), np.array([mass]), True)
    sigma = _slot_sigma(state, current_strategy(state.regrets), type_id)
    walker = _Walker(state, sigma, player, scheme, state.iteration + 1, update_strategy=False)
    value = walker.full(state.tree.node_index(history), reach_own, reach_opp)
    return float(np.asarray(value)[0]), walker.delta


def observe_competitor(state: SolverState) -> None:
    """Watch the competitor play and fold each hand into the posterior."""

    if state.bank is None or state.kernel is None:
        return
    for _ in range(state.config.belief.observations_per_iteration):
        features = observe_type(state.spec, state.competitor_type, state.belief_rng)
        state.bank.add_observation(features)
        state.belief = posterior_update(state.belief, features, state.bank, state.kernel)


def _finish_iteration(state: SolverState) -> SolverState:
    state.iteration += 1
    return state


ITERATORS: dict[str, Callable[[SolverState], SolverState]] = {
    "cfr": cfr_iterate,
    "cfr+": cfr_plus_iterate,
    "mccfr-ext": mccfr_external_iterate,
    "bcfr": bcfr_iterate,
    "bcfr+": bcfr_plus_iterate,
    "bcfr-no-posterior": bcfr_iterate,
    "cig": cig_iterate,
}


def iterate(state: SolverState) -> SolverState:
    return ITERATORS[state.algorithm](state)


def average_profile(state: SolverState) -> StrategyProfile:
    """The normalised average strategy (one slot, or one per type for ``cig``)."""

    return StrategyProfile.from_table(state.tree, average_profile_table(state.strategy))


def current_profile(state: SolverState) -> StrategyProfile:
    return StrategyProfile.from_table(state.tree, current_strategy(state.regrets))


def solve(
    spec: GameSpec,
    config: SolverConfig,
    *,
    competitor_type: int | None = None,
    callback: Callable[[SolverState], None] | None = None,
) -> SolverState:
    """Run ``config.iterations`` iterations, calling *callback* after each one."""

    state = init_state(spec, config, competitor_type=competitor_type)
    step = ITERATORS[config.algorithm]
    for _ in range(config.iterations):
        step(state)
        logger.debug("%s iteration %d", config.algorithm, state.iteration)
        if callback is not None:
            callback(state)
    return state
