"""Exact returns and best responses for tabular goofspiel policies."""

from __future__ import annotations

import itertools

import numpy as np

from .game import GameSpec, infostate_table
from .policy import (
    PopulationSnapshot,
    SpecMismatchError,
    TabularPolicy,
    aggregate_mixture,
    check_mixture,
)

__all__ = [
    "path_reach",
    "expected_value",
    "values_against",
    "mixture_value",
    "exact_best_response",
    "best_response_to_mixture",
    "brute_force_best_response",
    "BRUTE_FORCE_MAX_CARDS",
]

BRUTE_FORCE_MAX_CARDS = 3
TIE_TOL = 1e-12


def path_reach(policy: TabularPolicy, seat: int) -> np.ndarray:
    """Probability that ``policy`` in ``seat`` plays its part of every joint terminal history."""
    table = policy.table
    nodes, cols = (table.node0, table.col0) if seat == 0 else (table.node1, table.col1)
    return policy.probs[nodes, cols].prod(axis=1)


def _same_spec(*policies):
    spec = policies[0].spec
    for p in policies[1:]:
        if p.spec != spec:
            raise SpecMismatchError(f"K={spec.num_cards} vs K={p.spec.num_cards}")
    return spec


def expected_value(policy: TabularPolicy, opponent: TabularPolicy) -> float:
    """Exact return of ``policy`` against ``opponent``."""
    _same_spec(policy, opponent)
    table = policy.table
    return float(np.sum(path_reach(policy, 0) * path_reach(opponent, 1) * table.returns))


def values_against(policy: TabularPolicy, opponents) -> np.ndarray:
    """Vector ``[J(policy, o) for o in opponents]`` in one pass."""
    opponents = list(opponents)
    _same_spec(policy, *opponents)
    table = policy.table
    weighted = path_reach(policy, 0) * table.returns
    return np.array([weighted @ path_reach(o, 1) for o in opponents])


def mixture_value(policy: TabularPolicy, opponents, sigma) -> float:
    """``sum_i sigma_i J(policy, opponents[i])``."""
    sigma = check_mixture(sigma, len(opponents))
    return float(values_against(policy, opponents) @ sigma)


def _backward_induction(spec: GameSpec, path_weight: np.ndarray) -> tuple[np.ndarray, float]:
    table = infostate_table(spec.num_cards)
    K = spec.num_cards
    # values indexed by node, plus a trailing zero slot for absent children
    values = np.zeros(table.num_nodes + 1)
    np.add.at(values, table.term0, path_weight)
    probs = np.zeros((table.num_decision, K))
    for t in range(K - 1, -1, -1):
        nodes = table.decision_by_turn[t]
        q = values[table.child[nodes]].sum(axis=2)
        q = np.where(table.legal[nodes], q, -np.inf)
        best = q.max(axis=1)
        # lowest bid rank among maximisers
        cols = np.argmax(q >= (best - TIE_TOL * np.maximum(1.0, np.abs(best)))[:, None], axis=1)
        probs[nodes, cols] = 1.0
        values[nodes] = best
    return probs, float(values[0])


def exact_best_response(opponent: TabularPolicy) -> tuple[TabularPolicy, float]:
    """Deterministic best response to ``opponent`` and its exact value.

    Terminal histories are weighted by the opponent's reach and grouped by the
    responder's terminal view; backward induction then maximises over the
    responder's information states.
    """
    table = opponent.table
    weight = path_reach(opponent, 1) * table.returns
    probs, value = _backward_induction(opponent.spec, weight)
    return TabularPolicy(opponent.spec, probs), value


def best_response_to_mixture(population, sigma) -> tuple[TabularPolicy, float]:
    """Best response to the mixture policy ``sigma`` over a population (or list of policies)."""
    policies = population.policies if isinstance(population, PopulationSnapshot) else list(population)
    sigma = check_mixture(sigma, len(policies))
    return exact_best_response(aggregate_mixture(policies, sigma))


def brute_force_best_response(opponent: TabularPolicy) -> tuple[TabularPolicy, float]:
    """Enumerate every deterministic tabular policy and keep the best.

    Ties go to the lexicographically smallest choice vector, with keys in
    encoded order and bids ascending.  Only for ``K <= 3``.
    """
    spec = opponent.spec
    K = spec.num_cards
    if K > BRUTE_FORCE_MAX_CARDS:
        raise ValueError(f"brute force is limited to K <= {BRUTE_FORCE_MAX_CARDS}, got K={K}")
    table = opponent.table
    order = sorted(range(table.num_decision), key=table.encoded.__getitem__)
    choices = [np.flatnonzero(table.legal[i]) for i in order]
    opp = path_reach(opponent, 1) * table.returns

    best_value, best_probs = -np.inf, None
    for combo in itertools.product(*choices):
        probs = np.zeros((table.num_decision, K))
        probs[order, combo] = 1.0
        value = float(np.sum(probs[table.node0, table.col0].prod(axis=1) * opp))
        if value > best_value + TIE_TOL:
            best_value, best_probs = value, probs
    return TabularPolicy(spec, best_probs), best_value
