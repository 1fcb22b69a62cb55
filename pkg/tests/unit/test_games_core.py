from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from bayescfr.games.core import (
    CHANCE,
    TERMINAL,
    Action,
    GameSpec,
    GameStructureError,
    InfoSetKey,
    acting_player,
    chance_distribution,
    collapse_types,
    extend,
    infoset_key,
    legal_actions,
    rollout_history,
    utility,
    validate_history,
)
from bayescfr.games.poker import BET, CALL, CHECK, FOLD

# Deal 0 gives player 0 the jack and player 1 the queen; deal 5 is king v queen.
JQ = ((CHANCE, 0),)
KQ = ((CHANCE, 5),)


def test_root_is_a_six_way_uniform_chance_node(kuhn_normal: GameSpec) -> None:
    assert acting_player(kuhn_normal, ()) == CHANCE
    outcomes = chance_distribution(kuhn_normal, ())
    assert len(outcomes) == 6
    assert [label for label, _ in outcomes][0] == Action(0, "JQ")
    assert all(p == pytest.approx(1 / 6) for _, p in outcomes)


def test_first_decision_offers_check_and_bet(kuhn_normal: GameSpec) -> None:
    actions = legal_actions(kuhn_normal, JQ)
    assert [a.id for a in actions] == [CHECK, BET]
    assert [a.label for a in actions] == ["check", "bet"]
    assert acting_player(kuhn_normal, JQ) == 0


def test_facing_a_bet_offers_fold_and_call(kuhn_normal: GameSpec) -> None:
    history = extend(JQ, 0, BET)
    assert [a.id for a in legal_actions(kuhn_normal, history)] == [FOLD, CALL]
    assert acting_player(kuhn_normal, history) == 1


def test_leduc_round_end_is_a_board_chance_node(leduc_normal: GameSpec) -> None:
    history = extend(extend(JQ, 0, CHECK), 1, CHECK)
    assert acting_player(leduc_normal, history) == CHANCE
    outcomes = chance_distribution(leduc_normal, history)
    assert len(outcomes) == 4
    assert sum(p for _, p in outcomes) == pytest.approx(1.0)


def test_infoset_key_hides_the_opponent_card(kuhn_normal: GameSpec) -> None:
    assert infoset_key(kuhn_normal, JQ) == InfoSetKey(0, "J|")
    after_check = extend(JQ, 0, CHECK)
    assert infoset_key(kuhn_normal, after_check) == InfoSetKey(1, "Q|k")
    other_deal = extend(((CHANCE, 1),), 0, CHECK)
    assert infoset_key(kuhn_normal, other_deal) == InfoSetKey(1, "K|k")
    assert str(InfoSetKey(1, "Q|k")) == "1:Q|k"


def test_infoset_key_rejects_non_decision_nodes(kuhn_normal: GameSpec) -> None:
    with pytest.raises(GameStructureError, match="not a decision node"):
        infoset_key(kuhn_normal, ())


def test_validate_history_rejects_illegal_moves(kuhn_normal: GameSpec) -> None:
    with pytest.raises(GameStructureError):
        validate_history(kuhn_normal, ((CHANCE, 0), (0, CALL)))
    with pytest.raises(GameStructureError):
        validate_history(kuhn_normal, ((CHANCE, 0), (1, CHECK)))
    with pytest.raises(GameStructureError):
        validate_history(kuhn_normal, ((CHANCE, 9),))


def test_validate_history_rejects_moves_past_a_terminal(kuhn_normal: GameSpec) -> None:
    terminal = extend(extend(JQ, 0, CHECK), 1, CHECK)
    assert acting_player(kuhn_normal, terminal) == TERMINAL
    assert legal_actions(kuhn_normal, terminal) == []
    with pytest.raises(GameStructureError):
        validate_history(kuhn_normal, extend(terminal, 0, CHECK))


def test_utility_of_showdowns_per_type(kuhn_mixed: GameSpec) -> None:
    check_check = extend(extend(JQ, 0, CHECK), 1, CHECK)
    for type_id in range(3):
        np.testing.assert_array_equal(utility(kuhn_mixed, check_check, type_id), [-1.0, 1.0])

    bet_call = extend(extend(KQ, 0, BET), 1, CALL)
    np.testing.assert_array_equal(utility(kuhn_mixed, bet_call, 0), [2.0, -2.0])
    np.testing.assert_array_equal(utility(kuhn_mixed, bet_call, 1), [1.0, -1.0])
    np.testing.assert_array_equal(utility(kuhn_mixed, bet_call, 2), [4.0, -4.0])


def test_utility_requires_a_terminal_and_a_known_type(kuhn_normal: GameSpec) -> None:
    with pytest.raises(GameStructureError, match="not terminal"):
        utility(kuhn_normal, JQ, 0)
    check_check = extend(extend(JQ, 0, CHECK), 1, CHECK)
    with pytest.raises(GameStructureError, match="Type 3"):
        utility(kuhn_normal, check_check, 3)


def test_rollout_history_reaches_a_terminal(leduc_normal: GameSpec) -> None:
    rng = np.random.default_rng(5)
    for _ in range(20):
        history = rollout_history(leduc_normal, 1, rng)
        assert acting_player(leduc_normal, history) == TERMINAL


def test_rollout_history_needs_a_behaviour_model(kuhn_normal: GameSpec) -> None:
    bare = dataclasses.replace(kuhn_normal, behaviour_fn=None)
    with pytest.raises(GameStructureError, match="no behaviour model"):
        rollout_history(bare, 0, np.random.default_rng(0))


def test_collapse_on_a_point_prior_keeps_that_type_exactly() -> None:
    from bayescfr.games.poker import build_kuhn

    typed = build_kuhn("pure-c")
    collapsed = collapse_types(typed)
    assert collapsed.num_types == 1
    assert collapsed.type_prior == (1.0,)
    bet_call = extend(extend(KQ, 0, BET), 1, CALL)
    np.testing.assert_array_equal(
        collapsed.utility_fn(bet_call)[:, 0], typed.utility_fn(bet_call)[:, 1]
    )


def test_collapse_mixes_utilities_by_weight(kuhn_mixed: GameSpec) -> None:
    bet_call = extend(extend(KQ, 0, BET), 1, CALL)
    collapsed = collapse_types(kuhn_mixed, [0.5, 0.25, 0.25])
    expected = 0.5 * 2.0 + 0.25 * 1.0 + 0.25 * 4.0
    assert collapsed.utility_fn(bet_call)[0, 0] == pytest.approx(expected)


def test_collapse_rejects_bad_weights(kuhn_mixed: GameSpec) -> None:
    with pytest.raises(GameStructureError, match="sum to one"):
        collapse_types(kuhn_mixed, [0.5, 0.5, 0.5])
    with pytest.raises(GameStructureError):
        collapse_types(kuhn_mixed, [1.0, 0.0])
    no_prior = dataclasses.replace(kuhn_mixed, type_prior=None)
    with pytest.raises(GameStructureError, match="no type prior"):
        collapse_types(no_prior)


def test_game_spec_validates_its_fields(kuhn_normal: GameSpec) -> None:
    with pytest.raises(GameStructureError, match="at least one type"):
        dataclasses.replace(kuhn_normal, num_types=0, type_labels=(), type_prior=None)
    with pytest.raises(GameStructureError, match="sum to one"):
        dataclasses.replace(kuhn_normal, type_prior=(0.5, 0.2, 0.2))
    with pytest.raises(GameStructureError, match="type labels"):
        dataclasses.replace(kuhn_normal, type_labels=("a",))
    with pytest.raises(GameStructureError, match="Big blind"):
        dataclasses.replace(kuhn_normal, big_blind=0.0)
