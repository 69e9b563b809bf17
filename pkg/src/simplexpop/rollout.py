"""Batched episode simulation over information-state tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import infostate_table


@dataclass
class Episodes:
    returns: np.ndarray  # (B,) player-0 return
    nodes0: np.ndarray  # (B, K) player-0 decision node per turn
    nodes1: np.ndarray
    actions0: np.ndarray  # (B, K) bid ranks
    actions1: np.ndarray
    outcomes: np.ndarray  # (B, K) player-0 perspective


def sample_columns(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` (rows need not be exactly normalised)."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cum[:, -1]
    return np.argmax(cum > u[:, None], axis=1)


def simulate(stack0: np.ndarray, idx0, stack1: np.ndarray, idx1, rng: np.random.Generator) -> Episodes:
    """Play ``len(idx0)`` episodes; episode ``b`` pits ``stack0[idx0[b]]`` against ``stack1[idx1[b]]``.

    ``stack0``/``stack1`` are ``(n, num_decision, K)`` arrays of policy tables.
    """
    idx0 = np.asarray(idx0, dtype=np.int64)
    idx1 = np.asarray(idx1, dtype=np.int64)
    K = stack0.shape[2]
    table = infostate_table(K)
    B = idx0.shape[0]
    n0 = np.zeros(B, dtype=np.int64)
    n1 = np.zeros(B, dtype=np.int64)
    out = Episodes(
        returns=np.zeros(B),
        nodes0=np.empty((B, K), dtype=np.int64),
        nodes1=np.empty((B, K), dtype=np.int64),
        actions0=np.empty((B, K), dtype=np.int64),
        actions1=np.empty((B, K), dtype=np.int64),
        outcomes=np.empty((B, K), dtype=np.int64),
    )
    for t in range(K):
        c0 = sample_columns(stack0[idx0, n0], rng)
        c1 = sample_columns(stack1[idx1, n1], rng)
        w = np.sign(c0 - c1)
        out.nodes0[:, t], out.nodes1[:, t] = n0, n1
        out.actions0[:, t], out.actions1[:, t] = c0 + 1, c1 + 1
        out.outcomes[:, t] = w
        out.returns += w * (K - t)
        n0 = table.child[n0, c0, w + 1]
        n1 = table.child[n1, c1, 1 - w]
    return out
