"""Population evaluation: any-mixture returns, exploitability, RPP and behavioural divergence."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma

from .best_response import best_response_to_mixture, values_against
from .meta import DEFAULT_TOL, eval_payoff_matrix, solve_matrix_game, solve_zero_sum_nash, unique_rows
from .policy import PopulationSnapshot, SpecMismatchError, TabularPolicy, aggregate_mixture, check_mixture
from .posterior import ImpossibleEvidenceError, likelihood_table
from .rollout import simulate
from .store import ConditionalPolicyStore, EmptyStoreError, uniform_over

__all__ = [
    "CANDIDATES",
    "MonteCarlo",
    "LevelSummary",
    "AnyMixtureReport",
    "DivergenceMatrix",
    "DivergenceCurve",
    "entropy",
    "dirichlet_mean_entropy",
    "concentration_for_entropy",
    "default_concentrations",
    "any_mixture_experiment",
    "exploitability",
    "rpp",
    "js_divergence",
    "jsd_matrix",
    "posterior_weighted_divergence",
]

CANDIDATES = ("exact_br", "informed", "uninformed", "ne_mixture")


def entropy(sigma) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    sigma = check_mixture(sigma)
    nz = sigma[sigma > 0]
    return float(-np.sum(nz * np.log(nz)))


def dirichlet_mean_entropy(alpha: float, k: int) -> float:
    """Expected entropy of a draw from the symmetric Dirichlet(alpha) on ``k`` categories."""
    return float(digamma(k * alpha + 1) - digamma(alpha + 1))


def concentration_for_entropy(target: float, k: int) -> float:
    """Symmetric concentration whose draws have mean entropy ``target`` (which must be below ``ln k``)."""
    if not 0 < target < np.log(k):
        raise ValueError(f"target entropy must lie in (0, ln {k})")
    return float(np.exp(brentq(lambda la: dirichlet_mean_entropy(np.exp(la), k) - target, -20, 20)))


def default_concentrations(k: int = 8, levels: int = 7, low: float = 0.46, high: float = 2.03) -> list[float]:
    """Concentrations spreading mean entropies evenly over ``[low, high]``.

    The band is given for 8 policies; for other ``k`` it is rescaled by
    ``ln k / ln 8`` so the levels cover the same fraction of the maximum.
    """
    if k < 2:
        raise ValueError("need at least two policies to vary the entropy")
    scale = np.log(k) / np.log(8)
    return [concentration_for_entropy(h * scale, k) for h in np.linspace(low, high, levels)]


@dataclass(frozen=True)
class MonteCarlo:
    episodes: int = 32


@dataclass
class LevelSummary:
    alpha: float
    samples: int
    mean_entropy: float
    mean_return: dict
    stderr: dict


@dataclass
class AnyMixtureReport:
    levels: list
    # per level: (samples, len(CANDIDATES)) returns against each sampled mixture
    returns: list = field(repr=False)
    sigmas: list = field(repr=False)
    mode: str = "exact"

    def gaps(self) -> np.ndarray:
        """Mean informed minus uninformed return per level."""
        return np.array([s.mean_return["informed"] - s.mean_return["uninformed"] for s in self.levels])

    def rows(self):
        for s in self.levels:
            for c in CANDIDATES:
                yield {
                    "level": self.levels.index(s),
                    "alpha": s.alpha,
                    "H": s.mean_entropy,
                    "candidate": c,
                    "mean_return": s.mean_return[c],
                    "stderr": s.stderr[c],
                }


def _mc_returns(stack, idx0, opp_stack, sigma, episodes, rng):
    opp = rng.choice(len(sigma), size=episodes, p=sigma)
    return simulate(stack, idx0, opp_stack, opp, rng).returns.mean()


def any_mixture_experiment(
    snapshot: PopulationSnapshot,
    store: ConditionalPolicyStore | None,
    levels,
    samples_per_level: int,
    rng: np.random.Generator,
    mode="exact",
    tol: float = DEFAULT_TOL,
) -> AnyMixtureReport:
    """Returns of four candidates against mixtures drawn from symmetric Dirichlet priors.

    Priors are drawn over the effective population (unique meta-graph rows).
    Candidates: a fresh exact best response, the store's policy at the drawn
    prior (informed), the store's policy at the uniform prior (uninformed) and
    the Nash mixture of the full payoff matrix.  ``mode`` is ``"exact"`` or a
    :class:`MonteCarlo` episode count.  With ``store=None`` only the exact
    best response and the Nash mixture are evaluated; the store-backed
    candidates are reported as NaN.
    """
    if store is not None and len(store) == 0 and store.fill is None:
        raise EmptyStoreError("conditional policy store is empty")
    levels = list(levels)
    if not levels:
        raise ValueError("at least one concentration level is required")
    policies = list(snapshot.policies)
    n = len(policies)
    U = snapshot.payoffs if snapshot.payoffs is not None else eval_payoff_matrix(policies)
    meta_graph = snapshot.meta_graph
    reps = unique_rows(meta_graph) if meta_graph is not None else list(range(n))
    ne = solve_zero_sum_nash(U, tol).strategy
    uninformed = store.lookup(uniform_over(reps, n)) if store is not None else None
    stack = np.stack([p.probs for p in policies])
    exact = mode == "exact"
    if not exact and not isinstance(mode, MonteCarlo):
        raise ValueError(f"unknown evaluation mode {mode!r}")

    summaries, all_returns, all_sigmas = [], [], []
    for alpha in levels:
        rets = np.empty((samples_per_level, len(CANDIDATES)))
        sigmas = np.zeros((samples_per_level, n))
        for s in range(samples_per_level):
            sigma = np.zeros(n)
            sigma[reps] = rng.dirichlet(np.full(len(reps), alpha))
            sigma /= sigma.sum()
            sigmas[s] = sigma
            br, br_value = best_response_to_mixture(policies, sigma)
            cands = [br] if store is None else [br, store.lookup(sigma), uninformed]
            rets[s, 1:3] = np.nan
            if exact:
                rets[s, 0] = br_value
                for c in range(1, len(cands)):
                    rets[s, c] = values_against(cands[c], policies) @ sigma
                rets[s, 3] = ne @ U @ sigma
            else:
                E = mode.episodes
                cand_stack = np.stack([c.probs for c in cands])
                for c in range(len(cands)):
                    rets[s, c] = _mc_returns(cand_stack, np.full(E, c), stack, sigma, E, rng)
                rets[s, 3] = _mc_returns(stack, rng.choice(n, size=E, p=ne), stack, sigma, E, rng)
        ents = np.array([_entropy_raw(x) for x in sigmas])
        summaries.append(
            LevelSummary(
                alpha=float(alpha),
                samples=samples_per_level,
                mean_entropy=float(ents.mean()),
                mean_return={c: float(rets[:, i].mean()) for i, c in enumerate(CANDIDATES)},
                stderr={
                    c: float(rets[:, i].std(ddof=1) / np.sqrt(samples_per_level)) if samples_per_level > 1 else 0.0
                    for i, c in enumerate(CANDIDATES)
                },
            )
        )
        all_returns.append(rets)
        all_sigmas.append(sigmas)
    return AnyMixtureReport(summaries, all_returns, all_sigmas, "exact" if exact else f"mc{mode.episodes}")


def _entropy_raw(sigma):
    nz = sigma[sigma > 0]
    return float(-np.sum(nz * np.log(nz)))


def exploitability(sigma, population) -> float:
    """Value of the exact best response to the mixture; never negative in this game."""
    return best_response_to_mixture(population, sigma)[1]


def rpp(U_cross, tol: float = DEFAULT_TOL) -> float:
    """Relative population performance: the Nash value ``p^T U q`` of the cross-population game."""
    return solve_matrix_game(U_cross, tol)[2]


def js_divergence(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise Jensen-Shannon divergence in nats (bounded by ``ln 2``)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)

    def kl(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(a > 0, a * np.log(a / b), 0.0)
        return terms.sum(axis=-1)

    return np.clip(0.5 * kl(p, m) + 0.5 * kl(q, m), 0.0, np.log(2))


@dataclass
class DivergenceMatrix:
    values: np.ndarray
    episodes: int


def _as_policies(population):
    return list(population.policies) if isinstance(population, PopulationSnapshot) else list(population)


def jsd_matrix(row_population, col_population, episodes: int, rng: np.random.Generator) -> DivergenceMatrix:
    """``D[i, j]``: mean JSD between row policy ``i`` and column policy ``j`` along row ``i``'s play.

    Row policy ``i`` plays ``episodes`` games against the uniform mixture of
    the column population; the divergence is averaged over every decision the
    row policy makes.
    """
    rows, cols = _as_policies(row_population), _as_policies(col_population)
    spec = rows[0].spec
    if any(p.spec != spec for p in rows + cols):
        raise SpecMismatchError("populations are defined on different game specs")
    row_stack = np.stack([p.probs for p in rows])
    col_stack = np.stack([p.probs for p in cols])
    D = np.zeros((len(rows), len(cols)))
    for i in range(len(rows)):
        opp = rng.integers(len(cols), size=episodes)
        eps = simulate(row_stack, np.full(episodes, i), col_stack, opp, rng)
        nodes = eps.nodes0.ravel()
        for j in range(len(cols)):
            D[i, j] = js_divergence(row_stack[i, nodes], col_stack[j, nodes]).mean()
    return DivergenceMatrix(D, episodes)


@dataclass
class DivergenceCurve:
    weighted: np.ndarray  # (K + 1,) mean posterior-weighted divergence at turns 0..K
    continuing: np.ndarray  # (K + 1,) episodes still running at each turn


def posterior_weighted_divergence(
    D,
    row_population,
    opponent: TabularPolicy,
    column: int,
    episodes: int,
    rng: np.random.Generator,
    row_policy: TabularPolicy | None = None,
    prior=None,
) -> DivergenceCurve:
    """Posterior-weighted divergence ``sigma_t^T D[:, column]`` as a row policy plays ``opponent``.

    ``sigma_t`` is the exact posterior over the row population given the row
    player's own bids and outcomes up to turn ``t``, starting from ``prior``
    (uniform by default).  The row player is normally the uninformed policy;
    without one the uniform mixture over the row population plays.
    """
    D = np.asarray(D, dtype=np.float64)
    rows = _as_policies(row_population)
    n = len(rows)
    if D.shape[0] != n:
        raise ValueError(f"divergence matrix has {D.shape[0]} rows for {n} row policies")
    prior = np.full(n, 1.0 / n) if prior is None else check_mixture(prior, n)
    player = aggregate_mixture(rows, np.full(n, 1.0 / n)) if row_policy is None else row_policy
    if opponent.spec != player.spec:
        raise SpecMismatchError("opponent plays a different game spec")
    K = player.spec.num_cards
    table = player.table
    L = likelihood_table(rows)
    eps = simulate(player.probs[None], np.zeros(episodes, dtype=np.int64), opponent.probs[None],
                   np.zeros(episodes, dtype=np.int64), rng)
    views = np.concatenate([eps.nodes0, np.empty((episodes, 1), dtype=np.int64)], axis=1)
    last = eps.nodes0[:, -1]
    views[:, -1] = table.child[last, eps.actions0[:, -1] - 1, eps.outcomes[:, -1] + 1]
    column_d = D[:, column]
    curve = np.empty(K + 1)
    for t in range(K + 1):
        weights = prior[:, None] * L[:, views[:, t]]
        total = weights.sum(axis=0)
        if np.any(total <= 0):
            raise ImpossibleEvidenceError("row population cannot explain an observed history")
        curve[t] = float(np.mean(column_d @ (weights / total)))
    return DivergenceCurve(curve, np.full(K + 1, episodes))
