import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplexpop.game import (
    GameSpec,
    IllegalActionError,
    InfoStateKey,
    InvalidSpecError,
    NotTerminalError,
    apply_joint_action,
    enumerate_infostates,
    infostate_key,
    infostate_table,
    new_game,
    terminal_return,
)


def play(spec, bids0, bids1):
    state = new_game(spec)
    for a0, a1 in zip(bids0, bids1):
        state, _ = apply_joint_action(state, a0, a1)
    return state


def naive_reachable_keys(K):
    """Decision keys found by walking every pair of bid orders."""
    keys = set()
    for p0 in itertools.permutations(range(1, K + 1)):
        for p1 in itertools.permutations(range(1, K + 1)):
            state = new_game(GameSpec(K))
            for a0, a1 in zip(p0, p1):
                keys.add(infostate_key(state, 0))
                keys.add(infostate_key(state, 1))
                state, _ = apply_joint_action(state, a0, a1)
    return keys


def test_new_game_hands():
    state = new_game(GameSpec(5))
    assert state.turn == 0
    assert state.hands == (frozenset({1, 2, 3, 4, 5}),) * 2
    assert state.actions == ((), ()) and state.outcomes == ()
    assert new_game(GameSpec(2)).hands == (frozenset({1, 2}),) * 2


def test_spec_rejects_single_card():
    with pytest.raises(InvalidSpecError):
        GameSpec(1)


def test_spec_roundtrip_and_points():
    spec = GameSpec(5)
    assert GameSpec.from_dict(spec.to_dict()) == spec
    assert spec.point_cards == (5, 4, 3, 2, 1)
    assert spec.max_return == 15


def test_tie_discards_card():
    state, w = apply_joint_action(new_game(GameSpec(5)), 3, 3)
    assert w == 0 and state.points == (0, 0)


def test_win_awards_card():
    state, w = apply_joint_action(new_game(GameSpec(5)), 5, 1)
    assert w == 1 and state.points == (5, 0)


def test_descending_vs_ascending_returns_six():
    state = play(GameSpec(5), (5, 4, 3, 2, 1), (1, 2, 3, 4, 5))
    assert state.points == (9, 3)
    assert terminal_return(state) == 6


def test_k2_return():
    assert terminal_return(play(GameSpec(2), (2, 1), (1, 2))) == 1


def test_identical_bids_return_zero():
    assert terminal_return(play(GameSpec(4), (2, 4, 1, 3), (2, 4, 1, 3))) == 0


def test_illegal_bid():
    state, _ = apply_joint_action(new_game(GameSpec(3)), 2, 1)
    with pytest.raises(IllegalActionError):
        apply_joint_action(state, 2, 3)
    with pytest.raises(IllegalActionError):
        apply_joint_action(state, 3, 1)
    with pytest.raises(IllegalActionError):
        apply_joint_action(new_game(GameSpec(3)), 4, 1)


def test_terminal_return_requires_terminal():
    with pytest.raises(NotTerminalError):
        terminal_return(new_game(GameSpec(3)))


def test_root_key_shared():
    state = new_game(GameSpec(5))
    assert infostate_key(state, 0) == infostate_key(state, 1) == InfoStateKey((), ())
    assert InfoStateKey((), ()).encode() == ""


def test_egocentric_keys():
    state, _ = apply_joint_action(new_game(GameSpec(5)), 4, 2)
    assert infostate_key(state, 0) == InfoStateKey((4,), (1,))
    assert infostate_key(state, 1) == InfoStateKey((2,), (-1,))


def test_hidden_opponent_bid():
    s1, _ = apply_joint_action(new_game(GameSpec(5)), 4, 1)
    s2, _ = apply_joint_action(new_game(GameSpec(5)), 4, 3)
    assert infostate_key(s1, 0) == infostate_key(s2, 0)


def test_key_encoding_roundtrip():
    key = InfoStateKey((5, 4, 3), (1, 0, -1))
    assert key.encode() == "5W4D3L"
    assert InfoStateKey.decode(key.encode()) == key
    with pytest.raises(ValueError):
        InfoStateKey.decode("5X")


def test_enumerate_k2():
    keys = enumerate_infostates(GameSpec(2))
    # outcome W after bidding 1 (or L after bidding 2) cannot happen
    assert len(keys) == 5
    table = infostate_table(2)
    for i, key in enumerate(table.decision_keys()):
        if key.turn == 1:
            assert table.num_legal[i] == 1


def test_enumerate_k3_counts():
    keys = enumerate_infostates(GameSpec(3))
    by_turn = [sum(k.turn == t for k in keys) for t in range(3)]
    assert by_turn == [1, 7, 28]


@pytest.mark.parametrize("K", [2, 3, 4])
def test_enumerate_matches_naive_walk(K):
    assert enumerate_infostates(GameSpec(K)) == naive_reachable_keys(K)


def test_every_key_has_legal_action():
    table = infostate_table(4)
    assert np.all(table.num_legal >= 1)
    for i, key in enumerate(table.decision_keys()):
        assert table.num_legal[i] == 4 - key.turn


def test_table_sizes_k5():
    table = infostate_table(5)
    assert table.num_decision == 4974
    assert table.num_paths == 120 * 120


def test_table_paths_reproduce_returns():
    K = 3
    table = infostate_table(K)
    for p in range(table.num_paths):
        bids0 = [int(c) + 1 for c in table.col0[p]]
        bids1 = [int(c) + 1 for c in table.col1[p]]
        assert terminal_return(play(GameSpec(K), bids0, bids1)) == table.returns[p]


bid_orders = st.integers(2, 5).flatmap(
    lambda k: st.tuples(st.just(k), st.permutations(range(1, k + 1)), st.permutations(range(1, k + 1)))
)


@settings(max_examples=200, deadline=None)
@given(bid_orders)
def test_swap_negates_return(case):
    K, p0, p1 = case
    spec = GameSpec(K)
    assert terminal_return(play(spec, p0, p1)) == -terminal_return(play(spec, p1, p0))


@settings(max_examples=200, deadline=None)
@given(bid_orders)
def test_returns_bounded_and_deterministic(case):
    K, p0, p1 = case
    spec = GameSpec(K)
    a, b = play(spec, p0, p1), play(spec, p0, p1)
    assert a == b
    assert abs(terminal_return(a)) <= spec.max_return
    assert sum(a.points) + sum(K - t for t, w in enumerate(a.outcomes) if w == 0) == spec.max_return


@settings(max_examples=100, deadline=None)
@given(bid_orders)
def test_perfect_recall(case):
    K, p0, p1 = case
    state = new_game(GameSpec(K))
    keys = [infostate_key(state, 0)]
    for a0, a1 in zip(p0, p1):
        state, _ = apply_joint_action(state, a0, a1)
        keys.append(infostate_key(state, 0))
    final = keys[-1]
    for t, key in enumerate(keys):
        assert key == InfoStateKey(final.actions[:t], final.outcomes[:t])
