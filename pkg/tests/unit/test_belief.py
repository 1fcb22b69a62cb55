from __future__ import annotations

import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bayescfr.belief import (
    BeliefState,
    DegenerateKernelError,
    EstimatorUnavailableError,
    KernelConfig,
    SampleBank,
    batch_posterior,
    ckde_convergence,
    ckde_likelihood,
    ckde_likelihoods,
    consistency_trial,
    fill_reference_bank,
    history_distance,
    kernel_eval,
    observe_type,
    posterior_l1,
    posterior_l1_error,
    posterior_update,
    sample_type,
    type_distance,
)
from bayescfr.games.core import GameSpec


def _two_cluster_bank(references: int = 200, seed: int = 0) -> SampleBank:
    rng = np.random.default_rng(seed)
    bank = SampleBank(2, references_per_type=references)
    for value in rng.normal(-2.0, 0.5, references):
        bank.add_reference(np.array([value]), 0)
    for value in rng.normal(2.0, 0.5, references):
        bank.add_reference(np.array([value]), 1)
    return bank


def test_kernel_eval_is_a_gaussian_density() -> None:
    config = KernelConfig()
    assert kernel_eval(config, 0.0, 1.0) == pytest.approx(1 / np.sqrt(2 * np.pi))
    assert kernel_eval(config, 2.0, 2.0) == pytest.approx(np.exp(-0.5) / np.sqrt(2 * np.pi))
    with pytest.raises(ValueError, match="finite"):
        kernel_eval(config, np.inf, 1.0)
    with pytest.raises(ValueError, match="bandwidth"):
        kernel_eval(config, 1.0, 0.0)


def test_kernel_config_validates_and_standardises() -> None:
    with pytest.raises(ValueError, match="positive"):
        KernelConfig(w=0.0)
    with pytest.raises(ValueError, match="Unsupported"):
        KernelConfig(shape="epanechnikov")
    features = np.array([[0.0, 1.0], [2.0, 1.0]])
    scaled = KernelConfig().standardized(features)
    assert scaled.scaling == pytest.approx((1.0, 1.0))
    assert history_distance([0.0, 0.0], [2.0, 0.0], scaled) == pytest.approx(2.0)


def test_distances() -> None:
    assert history_distance([0.0, 3.0], [4.0, 0.0]) == pytest.approx(5.0)
    assert type_distance(1, 1) == 0.0
    assert type_distance(0, 2) == 1.0
    with pytest.raises(ValueError, match="shapes differ"):
        history_distance([0.0], [0.0, 1.0])


def test_sample_bank_is_bounded_per_type() -> None:
    bank = SampleBank(2, references_per_type=3, observation_window=2)
    for index in range(5):
        bank.add_reference(np.array([float(index)]), 0)
        bank.add_observation(np.array([float(index)]))
    assert bank.reference_count(0) == 3
    assert bank.reference_count() == 3
    features, labels = bank.references()
    np.testing.assert_array_equal(features[:, 0], [2.0, 3.0, 4.0])
    np.testing.assert_array_equal(labels, [0, 0, 0])
    assert len(bank.observations) == 2
    with pytest.raises(ValueError, match="Type 2"):
        bank.add_reference(np.array([0.0]), 2)


def test_likelihood_favours_the_nearby_cluster() -> None:
    bank = _two_cluster_bank()
    config = KernelConfig(w=0.5, w_prime=0.5)
    likelihoods = ckde_likelihoods(np.array([-2.0]), bank, config)
    assert likelihoods[0] > likelihoods[1]
    assert ckde_likelihood(np.array([2.0]), 1, bank, config) > ckde_likelihood(
        np.array([2.0]), 0, bank, config
    )


def test_likelihood_needs_references_and_kernel_mass() -> None:
    with pytest.raises(EstimatorUnavailableError):
        ckde_likelihoods(np.array([0.0]), SampleBank(2), KernelConfig())
    one_sided = SampleBank(2)
    one_sided.add_reference(np.array([0.0]), 0)
    with pytest.raises(DegenerateKernelError):
        ckde_likelihoods(np.array([0.0]), one_sided, KernelConfig(w_prime=1e-3))
    bank = _two_cluster_bank(references=5)
    with pytest.raises(ValueError, match="Feature shape"):
        ckde_likelihoods(np.array([0.0, 1.0]), bank, KernelConfig())


def test_posterior_concentrates_on_the_observed_cluster() -> None:
    bank = _two_cluster_bank()
    config = KernelConfig(w=0.5, w_prime=0.5)
    observations = [np.array([value]) for value in np.random.default_rng(1).normal(2.0, 0.5, 30)]
    state = batch_posterior([0.5, 0.5], observations, bank, config)
    assert state.observations == 30
    assert state.probabilities[1] > 0.99
    assert posterior_l1(state, 1) < 0.02


def test_incremental_updates_equal_the_one_shot_posterior() -> None:
    bank = _two_cluster_bank()
    config = KernelConfig(w=0.5, w_prime=0.5)
    prior = np.array([0.3, 0.7])
    observations = [np.array([value]) for value in (-1.5, 0.4, 2.2, -0.3, 1.1, -2.4)]

    joint = prior.copy()
    for features in observations:
        joint *= ckde_likelihoods(features, bank, config)
    expected = joint / joint.sum()

    state = BeliefState.from_prior(prior)
    for features in observations:
        state = posterior_update(state, features, bank, config)
    np.testing.assert_allclose(state.probabilities, expected, rtol=1e-10)
    np.testing.assert_allclose(
        batch_posterior(prior, observations, bank, config).probabilities, expected, rtol=1e-10
    )


def test_zero_prior_mass_stays_zero() -> None:
    bank = _two_cluster_bank()
    state = BeliefState.from_prior([1.0, 0.0])
    state = posterior_update(state, np.array([2.0]), bank, KernelConfig(w=0.5))
    np.testing.assert_array_equal(state.probabilities, [1.0, 0.0])


def test_posterior_stagnates_when_nothing_explains_the_observation(caplog) -> None:
    bank = _two_cluster_bank()
    config = KernelConfig(w=1e-3, w_prime=0.5)
    state = BeliefState.uniform(2)
    with caplog.at_level(logging.WARNING, logger="bayescfr"):
        updated = posterior_update(state, np.array([500.0]), bank, config)
    assert updated.stagnant
    np.testing.assert_array_equal(updated.probabilities, state.probabilities)
    assert "stagnated" in caplog.text


def test_belief_state_validation() -> None:
    with pytest.raises(ValueError, match="sum to one"):
        BeliefState(np.array([0.5, 0.2]), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError, match="positive mass"):
        BeliefState.from_prior([0.0, 0.0])
    assert BeliefState.from_prior([2.0, 2.0]).probabilities == pytest.approx([0.5, 0.5])


def test_sample_type_follows_the_posterior() -> None:
    rng = np.random.default_rng(2)
    state = BeliefState.from_prior([0.0, 0.0, 1.0])
    assert {sample_type(state, rng) for _ in range(50)} == {2}


def test_sample_type_matches_posterior_frequencies() -> None:
    rng = np.random.default_rng(11)
    state = BeliefState.from_prior([0.2, 0.3, 0.5])
    draws = np.array([sample_type(state, rng) for _ in range(10_000)])
    frequencies = np.bincount(draws, minlength=3) / len(draws)
    np.testing.assert_allclose(frequencies, [0.2, 0.3, 0.5], atol=0.02)


def test_posterior_l1_against_a_point_mass() -> None:
    assert posterior_l1([0.5, 0.25, 0.25], 0) == pytest.approx(1.0)
    assert posterior_l1(BeliefState.uniform(2), 1) == pytest.approx(1.0)


def test_posterior_l1_error_bounds() -> None:
    assert posterior_l1_error([0.2, 0.3, 0.5], BeliefState.from_prior([0.2, 0.3, 0.5])) == pytest.approx(0.0)
    assert posterior_l1_error([1.0, 0.0], [0.0, 1.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError, match="different types"):
        posterior_l1_error([1.0, 0.0], [1.0, 0.0, 0.0])


_weights = st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=3, max_size=3)


@given(left=_weights, right=_weights)
def test_posterior_l1_error_is_a_symmetric_bounded_distance(left, right) -> None:
    p = np.asarray(left) / sum(left)
    q = np.asarray(right) / sum(right)
    distance = posterior_l1_error(p, q)
    assert distance == pytest.approx(posterior_l1_error(q, p))
    assert 0.0 <= distance <= 2.0 + 1e-12


def test_reference_bank_from_scripted_play(kuhn_mixed: GameSpec) -> None:
    rng = np.random.default_rng(4)
    bank = SampleBank(3, references_per_type=25)
    fill_reference_bank(kuhn_mixed, bank, rng)
    assert [bank.reference_count(t) for t in range(3)] == [25, 25, 25]
    assert observe_type(kuhn_mixed, 2, rng).shape == bank.references()[0].shape[1:]


def test_consistency_trial_trajectory_shape() -> None:
    trial = consistency_trial(0, references=100, observations=40)
    assert trial.l1_errors.shape == (40,)
    assert 0 <= trial.true_type < 3
    assert trial.l1_errors[-1] < trial.l1_errors[0] + 1e-12


@pytest.mark.slow
def test_posterior_is_consistent_across_trials() -> None:
    finals = [consistency_trial(seed).l1_errors[-1] for seed in range(100)]
    assert sum(error < 0.2 for error in finals) >= 95


@pytest.mark.slow
def test_ckde_error_shrinks_with_more_references() -> None:
    errors = ckde_convergence((125, 250, 500, 1000), seeds=20)
    for smaller, larger in zip(errors, errors[1:]):
        assert larger <= smaller * 1.1
    assert errors[-1] < errors[0]


_coordinates = st.lists(
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False), min_size=2, max_size=2
)


@given(_coordinates, _coordinates)
def test_history_distance_is_a_symmetric_metric(first: list[float], second: list[float]) -> None:
    forward = history_distance(first, second)
    assert forward == pytest.approx(history_distance(second, first))
    assert forward >= 0.0
    assert history_distance(first, first) == 0.0


@given(st.floats(min_value=-50.0, max_value=50.0), st.floats(min_value=0.05, max_value=10.0))
def test_kernel_is_even_in_the_distance(distance: float, bandwidth: float) -> None:
    config = KernelConfig()
    assert kernel_eval(config, -distance, bandwidth) == kernel_eval(config, distance, bandwidth)


@given(st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=0.05, max_value=10.0))
def test_kernel_is_bounded_by_its_peak(distance: float, bandwidth: float) -> None:
    config = KernelConfig()
    value = kernel_eval(config, distance, bandwidth)
    assert 0.0 <= value <= kernel_eval(config, 0.0, bandwidth)
