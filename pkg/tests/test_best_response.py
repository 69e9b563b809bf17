import itertools

import numpy as np
import pytest
from helpers import random_policy

from simplexpop.best_response import (
    best_response_to_mixture,
    brute_force_best_response,
    exact_best_response,
    expected_value,
    mixture_value,
    values_against,
)
from simplexpop.game import GameSpec, apply_joint_action, infostate_key, new_game, terminal_return
from simplexpop.policy import (
    SpecMismatchError,
    aggregate_mixture,
    point_matching_policy,
    sacrifice_top_policy,
    uniform_random_policy,
)



def naive_value(pi, opp):
    """Expected return by walking the game tree with the engine, independent of the path tables."""
    K = pi.spec.num_cards
    table = pi.table

    def walk(state, prob):
        if state.is_terminal:
            return prob * terminal_return(state)
        i0 = table.index[infostate_key(state, 0)]
        i1 = table.index[infostate_key(state, 1)]
        total = 0.0
        for a0, a1 in itertools.product(range(1, K + 1), repeat=2):
            p = pi.probs[i0, a0 - 1] * opp.probs[i1, a1 - 1]
            if p > 0:
                total += walk(apply_joint_action(state, a0, a1)[0], prob * p)
        return total

    return walk(new_game(pi.spec), 1.0)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_expected_value_matches_tree_walk(K):
    spec = GameSpec(K)
    rng = np.random.default_rng(K)
    for _ in range(3):
        a, b = random_policy(spec, rng, 0.3), random_policy(spec, rng)
        assert expected_value(a, b) == pytest.approx(naive_value(a, b), abs=1e-12)


def test_self_play_is_zero():
    spec = GameSpec(5)
    for pi in (uniform_random_policy(spec), point_matching_policy(spec), random_policy(spec, np.random.default_rng(0))):
        assert expected_value(pi, pi) == pytest.approx(0.0, abs=1e-12)


def test_known_values_k5():
    spec = GameSpec(5)
    pm, st, u = point_matching_policy(spec), sacrifice_top_policy(spec), uniform_random_policy(spec)
    assert expected_value(pm, st) == pytest.approx(-5.0, abs=1e-12)
    assert expected_value(st, pm) == pytest.approx(5.0, abs=1e-12)
    assert expected_value(pm, u) == pytest.approx(4.0, abs=1e-9)


def test_spec_mismatch():
    with pytest.raises(SpecMismatchError):
        expected_value(uniform_random_policy(GameSpec(2)), uniform_random_policy(GameSpec(3)))


def test_br_to_uniform_is_point_matching_value():
    spec = GameSpec(5)
    br, value = exact_best_response(uniform_random_policy(spec))
    assert value == pytest.approx(expected_value(point_matching_policy(spec), uniform_random_policy(spec)), abs=1e-9)
    assert br.is_deterministic()
    assert expected_value(br, uniform_random_policy(spec)) == pytest.approx(value, abs=1e-9)


def test_br_to_point_matching_attained_by_sacrifice_top():
    spec = GameSpec(5)
    _, value = exact_best_response(point_matching_policy(spec))
    assert value >= 5.0 - 1e-9
    assert expected_value(sacrifice_top_policy(spec), point_matching_policy(spec)) == pytest.approx(value, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_brute_force_agrees_k3(seed):
    spec = GameSpec(3)
    opp = random_policy(spec, np.random.default_rng(seed), sparsity=0.3)
    bf_pi, bf_value = brute_force_best_response(opp)
    ex_pi, ex_value = exact_best_response(opp)
    assert ex_value == pytest.approx(bf_value, abs=1e-9)
    assert expected_value(bf_pi, opp) == pytest.approx(bf_value, abs=1e-12)


def test_brute_force_k2():
    spec = GameSpec(2)
    for opp in (point_matching_policy(spec), sacrifice_top_policy(spec), uniform_random_policy(spec)):
        assert exact_best_response(opp)[1] == pytest.approx(brute_force_best_response(opp)[1], abs=1e-12)
    assert brute_force_best_response(point_matching_policy(spec))[1] == pytest.approx(0.0, abs=1e-12)
    # bid 2 first: half the time both tie, otherwise take card 2 and concede card 1
    assert brute_force_best_response(uniform_random_policy(spec))[1] == pytest.approx(0.5, abs=1e-12)


def test_brute_force_refuses_large_games():
    with pytest.raises(ValueError):
        brute_force_best_response(uniform_random_policy(GameSpec(4)))


def test_br_dominates_candidates():
    spec = GameSpec(4)
    rng = np.random.default_rng(7)
    opp = random_policy(spec, rng)
    _, value = exact_best_response(opp)
    candidates = [random_policy(spec, rng, 0.5) for _ in range(20)]
    candidates += [uniform_random_policy(spec), point_matching_policy(spec), sacrifice_top_policy(spec)]
    for c in candidates:
        assert value >= expected_value(c, opp) - 1e-9


def test_br_breaks_ties_to_lowest_rank():
    spec = GameSpec(3)
    # against point matching, opening with 1 or with 3 both reach the best value 0
    br, _ = exact_best_response(point_matching_policy(spec))
    assert br.is_deterministic()
    root = br.probs[0]
    assert root[0] == 1.0


def test_mixture_one_hot_matches_single():
    spec = GameSpec(4)
    pols = [uniform_random_policy(spec), point_matching_policy(spec), sacrifice_top_policy(spec)]
    for i in range(3):
        sigma = np.eye(3)[i]
        a, va = best_response_to_mixture(pols, sigma)
        b, vb = exact_best_response(pols[i])
        assert va == pytest.approx(vb, abs=1e-12)
        assert a == b


def test_mixture_br_dominates_members():
    spec = GameSpec(4)
    rng = np.random.default_rng(11)
    pols = [uniform_random_policy(spec), point_matching_policy(spec), random_policy(spec, rng, 0.4)]
    for _ in range(5):
        sigma = rng.dirichlet(np.ones(3))
        br, value = best_response_to_mixture(pols, sigma)
        assert mixture_value(br, pols, sigma) == pytest.approx(value, abs=1e-9)
        for p in pols:
            assert value >= values_against(p, pols) @ sigma - 1e-9
        assert value >= -1e-12


def test_mixture_matches_brute_force_k3():
    spec = GameSpec(3)
    pols = [uniform_random_policy(spec), point_matching_policy(spec)]
    sigma = np.array([0.5, 0.5])
    _, value = best_response_to_mixture(pols, sigma)
    _, bf_value = brute_force_best_response(aggregate_mixture(pols, sigma))
    assert value == pytest.approx(bf_value, abs=1e-9)


def test_br_value_convex_in_sigma():
    spec = GameSpec(4)
    rng = np.random.default_rng(5)
    pols = [random_policy(spec, rng, 0.3) for _ in range(4)]
    for _ in range(10):
        s1, s2 = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        lam = rng.random()
        mid = lam * s1 + (1 - lam) * s2
        v = best_response_to_mixture(pols, mid / mid.sum())[1]
        v1 = best_response_to_mixture(pols, s1)[1]
        v2 = best_response_to_mixture(pols, s2)[1]
        assert v <= lam * v1 + (1 - lam) * v2 + 1e-9
