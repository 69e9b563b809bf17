"""Tabular behavioural policies over goofspiel information states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec, InfoStateKey, infostate_table

__all__ = [
    "TabularPolicy",
    "PopulationSnapshot",
    "SpecMismatchError",
    "check_mixture",
    "uniform_random_policy",
    "point_matching_policy",
    "sacrifice_top_policy",
    "deterministic_policy",
    "own_reach_probs",
    "node_reach",
    "aggregate_mixture",
]

SIMPLEX_TOL = 1e-12


class SpecMismatchError(ValueError):
    pass


class TabularPolicy:
    """Action distributions for every decision information state of one ``GameSpec``.

    ``probs`` has shape ``(num_decision, K)``; column ``c`` is bid rank ``c + 1``.
    The array is frozen on construction.
    """

    __slots__ = ("spec", "probs")

    def __init__(self, spec: GameSpec, probs: np.ndarray, validate: bool = True):
        table = infostate_table(spec.num_cards)
        probs = np.array(probs, dtype=np.float64)
        if probs.shape != (table.num_decision, spec.num_cards):
            raise ValueError(
                f"policy array has shape {probs.shape}, expected {(table.num_decision, spec.num_cards)}"
            )
        if validate:
            if np.any(probs < 0) or np.any(probs[~table.legal] != 0):
                raise ValueError("policy puts mass on negative or illegal entries")
            if np.any(np.abs(probs.sum(axis=1) - 1.0) > SIMPLEX_TOL):
                raise ValueError("policy rows must sum to 1")
        probs.setflags(write=False)
        self.spec = spec
        self.probs = probs

    @property
    def table(self):
        return infostate_table(self.spec.num_cards)

    def action_probs(self, key: InfoStateKey) -> dict[int, float]:
        row = self.probs[self.table.index[key]]
        return {c + 1: float(p) for c, p in enumerate(row) if self.table.legal[self.table.index[key], c]}

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0) | (self.probs == 1)))

    def __eq__(self, other):
        if not isinstance(other, TabularPolicy):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.spec, self.probs.tobytes()))

    def __repr__(self):
        kind = "deterministic" if self.is_deterministic() else "stochastic"
        return f"TabularPolicy(K={self.spec.num_cards}, {kind})"

    def to_json_dict(self) -> dict[str, list[list]]:
        """``{key: [[action, prob], ...]}`` with keys sorted; zero-probability actions omitted."""
        table = self.table
        out = {}
        for i in sorted(range(table.num_decision), key=table.encoded.__getitem__):
            row = self.probs[i]
            out[table.encoded[i]] = [[int(c) + 1, float(row[c])] for c in np.flatnonzero(row > 0)]
        return out

    @classmethod
    def from_json_dict(cls, spec: GameSpec, data: dict) -> "TabularPolicy":
        table = infostate_table(spec.num_cards)
        probs = np.zeros((table.num_decision, spec.num_cards))
        seen = np.zeros(table.num_decision, dtype=bool)
        for key, entries in data.items():
            i = table.by_encoded.get(key)
            if i is None or i >= table.num_decision:
                raise ValueError(f"unknown information state {key!r} for K={spec.num_cards}")
            for action, prob in entries:
                probs[i, int(action) - 1] = float(prob)
            seen[i] = True
        if not seen.all():
            raise ValueError(f"policy is missing {int((~seen).sum())} information states")
        return cls(spec, probs)


@dataclass(frozen=True)
class PopulationSnapshot:
    """Ordered policies with their meta-graph and payoff matrix; slot 0 is the fixed seed."""

    spec: GameSpec
    policies: tuple[TabularPolicy, ...]
    meta_graph: np.ndarray = field(default=None)
    payoffs: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        n = len(self.policies)
        if n == 0:
            raise ValueError("population is empty")
        for p in self.policies:
            if p.spec != self.spec:
                raise SpecMismatchError("population mixes game specs")
        for name in ("meta_graph", "payoffs"):
            m = getattr(self, name)
            if m is not None:
                m = np.asarray(m, dtype=np.float64)
                if m.shape != (n, n):
                    raise ValueError(f"{name} has shape {m.shape}, population has {n} policies")
                object.__setattr__(self, name, m)

    def __len__(self):
        return len(self.policies)


def check_mixture(sigma, n: int | None = None) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 1 or sigma.size == 0:
        raise ValueError(f"mixture must be a non-empty vector, got shape {sigma.shape}")
    if n is not None and sigma.size != n:
        raise ValueError(f"mixture has {sigma.size} entries for {n} policies")
    if np.any(sigma < 0) or abs(sigma.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"mixture is not a simplex point: {sigma}")
    return sigma


def uniform_random_policy(spec: GameSpec) -> TabularPolicy:
    table = infostate_table(spec.num_cards)
    probs = table.legal / table.num_legal[:, None]
    return TabularPolicy(spec, probs)


def deterministic_policy(spec: GameSpec, choose) -> TabularPolicy:
    """Build a pure policy from ``choose(key) -> bid rank``."""
    table = infostate_table(spec.num_cards)
    probs = np.zeros((table.num_decision, spec.num_cards))
    for i, key in enumerate(table.decision_keys()):
        rank = choose(key)
        if not table.legal[i, rank - 1]:
            raise ValueError(f"bid {rank} is illegal at {key.encode()!r}")
        probs[i, rank - 1] = 1.0
    return TabularPolicy(spec, probs)


def _lowest_legal(key: InfoStateKey, K: int) -> int:
    return min(set(range(1, K + 1)) - set(key.actions))


def point_matching_policy(spec: GameSpec) -> TabularPolicy:
    """Bid the card matching the point card (``K - t``) whenever it is still held."""
    K = spec.num_cards

    def choose(key):
        target = K - key.turn
        return target if target not in key.actions else _lowest_legal(key, K)

    return deterministic_policy(spec, choose)


def sacrifice_top_policy(spec: GameSpec) -> TabularPolicy:
    """Throw away the top point card with bid 1, then outbid by one: bid ``k + 1`` on card ``k``."""
    K = spec.num_cards

    def choose(key):
        target = 1 if key.turn == 0 else K - key.turn + 1
        return target if target not in key.actions else _lowest_legal(key, K)

    return deterministic_policy(spec, choose)


def node_reach(policy: TabularPolicy) -> np.ndarray:
    """Own-contribution reach probability of every node (decision and terminal) of the table."""
    table = policy.table
    reach = np.ones(table.num_nodes)
    nonroot = np.flatnonzero(table.parent >= 0)
    # nodes are ordered by turn, so one pass per turn level suffices
    for t in range(1, policy.spec.num_cards + 1):
        idx = nonroot[table.turn[nonroot] == t]
        reach[idx] = reach[table.parent[idx]] * policy.probs[table.parent[idx], table.parent_col[idx]]
    return reach


def own_reach_probs(policy: TabularPolicy) -> dict[InfoStateKey, float]:
    reach = node_reach(policy)
    return {k: float(reach[i]) for i, k in enumerate(policy.table.keys)}


def aggregate_mixture(policies, sigma) -> TabularPolicy:
    """Behavioural policy realisation-equivalent to drawing ``policies[i]`` with probability ``sigma[i]``.

    At each information state the mixture weights are reweighted by each
    member's own reach probability.  States no member reaches get the uniform
    distribution over legal bids.
    """
    policies = list(policies)
    sigma = check_mixture(sigma, len(policies))
    spec = policies[0].spec
    if any(p.spec != spec for p in policies):
        raise SpecMismatchError("cannot aggregate policies of different game specs")
    table = infostate_table(spec.num_cards)
    nd = table.num_decision
    weights = np.stack([s * node_reach(p)[:nd] for s, p in zip(sigma, policies)])
    num = np.einsum("in,ina->na", weights, np.stack([p.probs for p in policies]))
    den = weights.sum(axis=0)
    probs = table.legal / table.num_legal[:, None]
    live = den > 0
    probs[live] = num[live] / den[live, None]
    # renormalise away rounding so rows stay inside the simplex tolerance
    probs[live] /= probs[live].sum(axis=1, keepdims=True)
    return TabularPolicy(spec, probs)
