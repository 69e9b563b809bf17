"""Meta-game payoffs, certified zero-sum Nash solving and the PSRO-Nash meta-graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .best_response import path_reach
from .policy import PopulationSnapshot, SpecMismatchError

__all__ = [
    "NashCertificate",
    "ConvergenceError",
    "eval_payoff_matrix",
    "cross_payoff_matrix",
    "solve_zero_sum_nash",
    "solve_matrix_game",
    "psro_nash_meta_graph",
    "unique_rows",
    "check_antisymmetric",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-8
ANTISYMMETRY_TOL = 1e-9
DUPLICATE_TOL = 1e-9


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class NashCertificate:
    strategy: np.ndarray
    value: float
    gap: float
    tol: float

    @property
    def valid(self) -> bool:
        return self.gap <= self.tol


def _policies(population):
    return population.policies if isinstance(population, PopulationSnapshot) else list(population)


def eval_payoff_matrix(population) -> np.ndarray:
    """``U[i, j] = J(pi_i, pi_j)``; the upper triangle is computed and reflected."""
    policies = _policies(population)
    spec = policies[0].spec
    if any(p.spec != spec for p in policies):
        raise SpecMismatchError("population mixes game specs")
    table = policies[0].table
    rows = np.stack([path_reach(p, 0) for p in policies]) * table.returns
    cols = np.stack([path_reach(p, 1) for p in policies])
    full = rows @ cols.T
    upper = np.triu(full, k=1)
    return upper - upper.T


def cross_payoff_matrix(row_population, col_population) -> np.ndarray:
    """``U[i, j] = J(row_i, col_j)`` between two populations of the same game."""
    rows_p, cols_p = _policies(row_population), _policies(col_population)
    spec = rows_p[0].spec
    if any(p.spec != spec for p in rows_p + cols_p):
        raise SpecMismatchError("populations are defined on different game specs")
    table = rows_p[0].table
    rows = np.stack([path_reach(p, 0) for p in rows_p]) * table.returns
    cols = np.stack([path_reach(p, 1) for p in cols_p])
    return rows @ cols.T


def check_antisymmetric(U, tol: float = ANTISYMMETRY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"payoff matrix must be square, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise ValueError("payoff matrix has non-finite entries")
    if np.max(np.abs(U + U.T), initial=0.0) > tol:
        raise ValueError("payoff matrix is not antisymmetric")
    return U


def _maximin(U: np.ndarray) -> np.ndarray:
    """Row player's maximin strategy for the zero-sum game ``U`` via HiGHS."""
    m, n = U.shape
    # variables: x (m), v; maximise v subject to (U^T x)_j >= v
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-U.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    A_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise ConvergenceError(f"LP solver failed: {res.message}")
    x = np.clip(res.x[:m], 0.0, None)
    return x / x.sum()


def _polish_symmetric(U: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Re-solve ``U_SS x_S = 0, sum x_S = 1`` on the support to remove LP round-off."""
    support = np.flatnonzero(x > 1e-10)
    A = np.vstack([U[np.ix_(support, support)], np.ones(len(support))])
    b = np.zeros(len(support) + 1)
    b[-1] = 1.0
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.any(sol < 0):
        return x
    out = np.zeros_like(x)
    out[support] = sol / sol.sum()
    return out


def _symmetric_gap(U, x):
    return float(np.max(U @ x) - x @ U @ x)


def solve_zero_sum_nash(U, tol: float = DEFAULT_TOL) -> NashCertificate:
    """Maximin strategy of a symmetric zero-sum meta-game with a certified gap.

    The gap is ``max_i (U x)_i - x^T U x``; a gap above ``tol`` raises
    :class:`ConvergenceError`.
    """
    U = check_antisymmetric(U)
    if U.shape[0] == 1:
        return NashCertificate(np.ones(1), 0.0, 0.0, tol)
    x = _maximin(U)
    gap = _symmetric_gap(U, x)
    if gap > 0.0:
        polished = _polish_symmetric(U, x)
        polished_gap = _symmetric_gap(U, polished)
        if polished_gap < gap:
            x, gap = polished, polished_gap
    gap = max(gap, 0.0)
    if gap > tol:
        raise ConvergenceError(f"Nash gap {gap:.3g} exceeds tolerance {tol:.3g}")
    return NashCertificate(x, float(x @ U @ x), gap, tol)


def solve_matrix_game(U, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray, float]:
    """Nash equilibrium ``(p, q)`` and value of the zero-sum game where the row player receives ``U``."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.size == 0 or not np.all(np.isfinite(U)):
        raise ValueError(f"payoff matrix must be a finite non-empty 2-D array, got shape {U.shape}")
    p = _maximin(U)
    q = _maximin(-U.T)
    lower = float(np.min(p @ U))
    upper = float(np.max(U @ q))
    if upper - lower > tol * max(1.0, float(np.max(np.abs(U)))):
        raise ConvergenceError(f"duality gap {upper - lower:.3g} exceeds tolerance {tol:.3g}")
    return p, q, float(p @ U @ q)


def psro_nash_meta_graph(U, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Row ``i`` is the Nash mixture of the leading ``i x i`` block; row 0 is one-hot on the seed."""
    U = check_antisymmetric(U)
    n = U.shape[0]
    sigma = np.zeros((n, n))
    sigma[0, 0] = 1.0
    for i in range(1, n):
        sigma[i, :i] = solve_zero_sum_nash(U[:i, :i], tol).strategy
    return sigma


def unique_rows(meta_graph, tol: float = DUPLICATE_TOL) -> list[int]:
    """First index of every distinct row.

    Row 0 belongs to the fixed seed policy, which is not trained against its
    row, so it is always its own representative and never absorbs another row.
    """
    meta_graph = np.asarray(meta_graph, dtype=np.float64)
    reps = [0]
    for i in range(1, meta_graph.shape[0]):
        if not any(
            r > 0 and np.max(np.abs(meta_graph[i] - meta_graph[r])) <= tol for r in reps
        ):
            reps.append(i)
    return reps
