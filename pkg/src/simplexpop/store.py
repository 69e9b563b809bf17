"""Best-response policies indexed by points of the population simplex.

This is the tabular counterpart of a mixture-conditioned policy: querying the
store with a mixture ``sigma`` returns the policy trained at the anchor
nearest to ``sigma`` in L1 distance.

Anchors come from two places.  Explicit anchors are written by training:
meta-graph rows, the uniform prior, and any grid points visited.  An optional
:class:`AnchorGrid` also defines every point with coordinates in multiples of
``1 / resolution`` over the effective population.  When a ``fill`` callable is
attached (an exact best-response oracle, which depends only on the frozen
population), grid points never trained explicitly are computed on first lookup
and cached.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .policy import TabularPolicy

__all__ = [
    "ANCHOR_DECIMALS",
    "EmptyStoreError",
    "AnchorGrid",
    "ConditionalPolicyStore",
    "canonical_anchor",
    "nearest_anchor",
    "barycentric_grid",
    "uniform_over",
    "lookup_conditional",
]

ANCHOR_DECIMALS = 12
TIE_TOL = 1e-12

Anchor = tuple[float, ...]


class EmptyStoreError(LookupError):
    pass


def canonical_anchor(sigma) -> Anchor:
    return tuple(float(x) for x in np.round(np.asarray(sigma, dtype=np.float64), ANCHOR_DECIMALS) + 0.0)


def nearest_anchor(query, pool) -> Anchor:
    """L1-nearest member of ``pool``; ties go to the lexicographically smallest anchor."""
    pool = sorted(set(pool))
    if not pool:
        raise EmptyStoreError("no anchors to choose from")
    dist = np.abs(np.asarray(pool) - np.asarray(query, dtype=np.float64)).sum(axis=1)
    best = dist.min()
    return next(a for a, d in zip(pool, dist) if d <= best + TIE_TOL)


def uniform_over(representatives, dim: int) -> np.ndarray:
    sigma = np.zeros(dim)
    sigma[list(representatives)] = 1.0 / len(representatives)
    return sigma


def barycentric_grid(representatives, dim: int, resolution: int) -> list[Anchor]:
    """All points with entries in multiples of ``1/resolution`` supported on ``representatives``."""
    return AnchorGrid(tuple(representatives), dim, resolution).points()


@dataclass(frozen=True)
class AnchorGrid:
    support: tuple[int, ...]
    dim: int
    resolution: int

    def size(self) -> int:
        k = len(self.support)
        return math.comb(self.resolution + k - 1, k - 1)

    def points(self) -> list[Anchor]:
        k, m = len(self.support), self.resolution
        out = []
        for bars in itertools.combinations(range(m + k - 1), k - 1):
            counts = np.diff(np.concatenate([[-1], bars, [m + k - 1]])) - 1
            out.append(self._embed(counts))
        return sorted(out)

    def _embed(self, counts) -> Anchor:
        sigma = np.zeros(self.dim)
        sigma[list(self.support)] = np.asarray(counts) / self.resolution
        return canonical_anchor(sigma)

    def nearest(self, query) -> Anchor:
        """L1-nearest grid point by largest-remainder rounding.

        Remainders that differ by less than the L1 tie tolerance count as
        equal; among those the later coordinates round up first, which yields
        the lexicographically smallest of the tied points.
        """
        query = np.asarray(query, dtype=np.float64)
        scaled = query[list(self.support)] * self.resolution
        counts = np.floor(scaled).astype(np.int64)
        frac = scaled - counts
        short = self.resolution - int(counts.sum())
        if short <= 0:
            return self._embed(counts)
        # swapping which of two coordinates rounds up moves the L1 distance by 2 * |dfrac| / m
        eps = TIE_TOL * self.resolution / 2
        threshold = np.sort(frac)[::-1][short - 1]
        above = np.flatnonzero(frac > threshold + eps)
        tied = np.flatnonzero(np.abs(frac - threshold) <= eps)
        counts[above] += 1
        counts[tied[::-1][: short - len(above)]] += 1
        return self._embed(counts)

    def contains(self, anchor) -> bool:
        anchor = np.asarray(anchor, dtype=np.float64)
        if len(anchor) != self.dim:
            return False
        off = np.ones(self.dim, dtype=bool)
        off[list(self.support)] = False
        scaled = anchor[~off] * self.resolution
        return bool(np.all(anchor[off] == 0) and np.allclose(scaled, np.round(scaled), atol=1e-9))


class ConditionalPolicyStore:
    """Anchor -> policy map over ``dim`` population slots with nearest-anchor lookup."""

    def __init__(self, dim: int, grid: AnchorGrid | None = None):
        self.dim = dim
        self.grid = grid
        self.fill: Callable[[np.ndarray], TabularPolicy] | None = None
        self._policies: dict[Anchor, TabularPolicy] = {}
        self._filled: dict[Anchor, TabularPolicy] = {}
        self._interned: dict[int, list[TabularPolicy]] = {}

    def __len__(self):
        return len(self._policies)

    def __contains__(self, sigma):
        return self._fit(sigma) in self._policies

    def anchors(self) -> list[Anchor]:
        return sorted(self._policies)

    def items(self) -> list[tuple[Anchor, TabularPolicy]]:
        return [(a, self._policies[a]) for a in self.anchors()]

    def _fit(self, sigma) -> Anchor:
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.size < self.dim:
            sigma = np.concatenate([sigma, np.zeros(self.dim - sigma.size)])
        elif sigma.size > self.dim:
            if np.any(sigma[self.dim :] != 0):
                raise ValueError(f"mixture has mass beyond the store's {self.dim} slots")
            sigma = sigma[: self.dim]
        return canonical_anchor(sigma)

    def _intern(self, policy: TabularPolicy) -> TabularPolicy:
        bucket = self._interned.setdefault(hash(policy), [])
        for p in bucket:
            if p == policy:
                return p
        bucket.append(policy)
        return policy

    def put(self, sigma, policy: TabularPolicy):
        self._policies[self._fit(sigma)] = self._intern(policy)

    def get(self, sigma) -> TabularPolicy | None:
        return self._policies.get(self._fit(sigma))

    def nearest(self, sigma) -> Anchor:
        query = self._fit(sigma)
        pool = list(self._policies)
        if self.grid is not None and self.fill is not None:
            pool.append(self.grid.nearest(query))
        if not pool:
            raise EmptyStoreError("conditional policy store is empty")
        return nearest_anchor(query, pool)

    def lookup(self, sigma) -> TabularPolicy:
        anchor = self.nearest(sigma)
        policy = self._policies.get(anchor)
        if policy is None:
            policy = self._filled.get(anchor)
            if policy is None:
                sigma = np.asarray(anchor)
                policy = self._filled[anchor] = self._intern(self.fill(sigma / sigma.sum()))
        return policy

    def expand(self, dim: int):
        """Re-express every anchor over ``dim >= self.dim`` slots; new slots get weight 0."""
        if dim < self.dim:
            raise ValueError("store dimension can only grow")
        pad = (0.0,) * (dim - self.dim)
        self._policies = {a + pad: p for a, p in self._policies.items()}
        self._filled = {}
        self.dim = dim

    def retain(self, keep):
        keep = {self._fit(a) for a in keep}
        self._policies = {a: p for a, p in self._policies.items() if a in keep}

    def unique_policies(self) -> list[TabularPolicy]:
        seen, out = set(), []
        for _, p in self.items():
            if id(p) not in seen:
                seen.add(id(p))
                out.append(p)
        return out


def lookup_conditional(store: ConditionalPolicyStore, sigma) -> TabularPolicy:
    return store.lookup(sigma)
