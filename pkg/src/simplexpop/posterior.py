"""Exact Bayesian posterior over opponent identities from a player's own bids and outcomes.

The opponent's bids are hidden, so the likelihood of an observation history
under opponent ``j`` sums, over every opponent bid sequence consistent with
the observed win/draw/loss outcomes, the probability that ``j`` plays it.
Transitions are deterministic, so consistency is a hard filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import GameSpec, InfoStateKey, infostate_table
from .policy import PopulationSnapshot, check_mixture

__all__ = [
    "ImpossibleEvidenceError",
    "PosteriorState",
    "consistent_opponent_sequences",
    "opponent_likelihood",
    "batch_posterior",
    "initial_posterior",
    "posterior_update",
    "likelihood_table",
]


class ImpossibleEvidenceError(ValueError):
    """No opponent in the population can produce the observed history."""


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def _policies(population):
    return population.policies if isinstance(population, PopulationSnapshot) else list(population)


def _check_history(own_actions, outcomes, K):
    if len(own_actions) != len(outcomes) or len(own_actions) > K:
        raise ValueError("own actions and outcomes must have equal length at most K")
    if len(set(own_actions)) != len(own_actions) or any(not 1 <= a <= K for a in own_actions):
        raise ValueError(f"{own_actions} is not a legal bid sequence for K={K}")
    if any(w not in (-1, 0, 1) for w in outcomes):
        raise ValueError(f"outcomes must be in {{-1, 0, 1}}, got {outcomes}")


def consistent_opponent_sequences(own_actions, outcomes, spec: GameSpec) -> list[tuple[int, ...]]:
    """Opponent bid prefixes ``b`` with ``sign(a_k - b_k) == w_k`` for every turn so far."""
    own_actions, outcomes = tuple(own_actions), tuple(outcomes)
    K = spec.num_cards
    _check_history(own_actions, outcomes, K)
    seqs = [()]
    for a, w in zip(own_actions, outcomes):
        seqs = [s + (b,) for s in seqs for b in range(1, K + 1) if b not in s and _sign(a - b) == w]
    return seqs


def _sequence_prob(policy, seq, outcomes) -> float:
    table = policy.table
    prob = 1.0
    for k, b in enumerate(seq):
        key = InfoStateKey(seq[:k], tuple(-w for w in outcomes[:k]))
        prob *= policy.probs[table.index[key], b - 1]
        if prob == 0.0:
            break
    return prob


def opponent_likelihood(own_actions, outcomes, opponent: int, population) -> float:
    """``Pr(history | opponent)`` summed over consistent hidden opponent bid sequences."""
    policy = _policies(population)[opponent]
    seqs = consistent_opponent_sequences(own_actions, outcomes, policy.spec)
    return float(sum(_sequence_prob(policy, s, tuple(outcomes)) for s in seqs))


def _normalise(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if not total > 0:
        raise ImpossibleEvidenceError("history has zero probability under every opponent")
    return weights / total


def batch_posterior(prior, own_actions, outcomes, population) -> np.ndarray:
    """Posterior from scratch: prior times full-history likelihood, normalised."""
    policies = _policies(population)
    prior = check_mixture(prior, len(policies))
    if len(own_actions) == 0:
        return prior.copy()
    like = np.array([opponent_likelihood(own_actions, outcomes, j, policies) for j in range(len(policies))])
    return _normalise(prior * like)


@dataclass(frozen=True)
class PosteriorState:
    prior: np.ndarray
    posterior: np.ndarray
    own_actions: tuple[int, ...]
    outcomes: tuple[int, ...]
    # per opponent: consistent hidden bid prefix -> probability the opponent played it
    messages: tuple[dict, ...]

    @property
    def turn(self) -> int:
        return len(self.own_actions)

    def likelihoods(self) -> np.ndarray:
        return np.array([sum(m.values()) for m in self.messages], dtype=float)


def initial_posterior(prior, population) -> PosteriorState:
    policies = _policies(population)
    prior = check_mixture(prior, len(policies)).copy()
    prior.setflags(write=False)
    return PosteriorState(prior, prior, (), (), tuple({(): 1.0} for _ in policies))


def posterior_update(state: PosteriorState, own_action: int, outcome: int, population) -> PosteriorState:
    """Extend the history by one turn and update the posterior multiplicatively."""
    policies = _policies(population)
    spec = policies[0].spec
    K = spec.num_cards
    if state.turn >= K:
        raise ValueError("game is already over")
    actions = state.own_actions + (own_action,)
    outcomes = state.outcomes + (outcome,)
    _check_history(actions, outcomes, K)
    table = infostate_table(K)
    opp_outcomes = tuple(-w for w in state.outcomes)

    messages = []
    for policy, message in zip(policies, state.messages):
        nxt: dict = {}
        for seq, prob in message.items():
            if prob == 0.0:
                continue
            row = policy.probs[table.index[InfoStateKey(seq, opp_outcomes)]]
            for b in range(1, K + 1):
                if b in seq or _sign(own_action - b) != outcome or row[b - 1] == 0.0:
                    continue
                nxt[seq + (b,)] = nxt.get(seq + (b,), 0.0) + prob * row[b - 1]
        messages.append(nxt)

    old = state.likelihoods()
    new = np.array([sum(m.values()) for m in messages], dtype=float)
    ratio = np.divide(new, old, out=np.zeros_like(new), where=old > 0)
    posterior = _normalise(state.posterior * ratio)
    posterior.setflags(write=False)
    return PosteriorState(state.prior, posterior, actions, outcomes, tuple(messages))


def likelihood_table(population) -> np.ndarray:
    """``L[j, v]``: probability that opponent ``j`` produces own-view node ``v`` (all nodes of the table).

    Computed from the joint terminal histories: every (view, hidden prefix)
    pair at turn ``t`` is shared by ``((K - t)!)^2`` completions.
    """
    policies = _policies(population)
    table = policies[0].table
    K = table.num_cards
    out = np.zeros((len(policies), table.num_nodes))
    for j, policy in enumerate(policies):
        step = policy.probs[table.node1, table.col1]
        prefix = np.concatenate([np.ones((table.num_paths, 1)), np.cumprod(step, axis=1)], axis=1)
        for t in range(K + 1):
            nodes = table.node0[:, t] if t < K else table.term0
            np.add.at(out[j], nodes, prefix[:, t] / math.factorial(K - t) ** 2)
    return out
