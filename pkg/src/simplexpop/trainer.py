"""Population growth under the PSRO-Nash meta-graph with best responses across the simplex.

The trainer keeps a population of tabular policies (slot 0 is a fixed uniform
random seed) and a :class:`ConditionalPolicyStore` that maps points of the
population simplex to best-response policies.  Rounds of approximate
best-response (ABR) calls train opponent priors drawn by
:func:`sample_opponent_prior`: with probability ``epsilon`` a Dirichlet draw
snapped to the anchor grid, otherwise a row of the meta-graph.  Meta-graph rows
are the population slots themselves.  After each batch of rounds the Nash
mixture of the whole population is best-responded to; the population grows
while that best response gains more than ``br_gain_threshold``.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from .best_response import best_response_to_mixture, mixture_value
from .game import GameSpec, infostate_table
from .meta import eval_payoff_matrix, psro_nash_meta_graph, solve_zero_sum_nash, unique_rows
from .policy import PopulationSnapshot, TabularPolicy, check_mixture, uniform_random_policy
from .rollout import sample_columns
from .seeding import fork_rng
from .store import (
    ANCHOR_DECIMALS,
    AnchorGrid,
    ConditionalPolicyStore,
    EmptyStoreError,
    canonical_anchor,
    lookup_conditional,
    nearest_anchor,
    uniform_over,
)

__all__ = [
    "AbrKind",
    "TrainerConfig",
    "ConditionalPolicyStore",
    "EmptyStoreError",
    "QState",
    "IterationRecord",
    "SimplexTrainer",
    "sample_opponent_prior",
    "abr_exact",
    "abr_tabular_q",
    "train",
    "attach_exact_fill",
    "lookup_conditional",
]

TIE_TOL = 1e-12
# grids up to this many points are trained in full by the final sweep
EAGER_LIMIT = 5000


class AbrKind(str, enum.Enum):
    EXACT = "exact"
    TABULAR_Q = "tabular_q"


@dataclass(frozen=True)
class TrainerConfig:
    epsilon: float = 0.5
    alpha: float = 1.0
    max_population: int = 8
    br_gain_threshold: float = 1e-3
    grid_resolution: int = 4
    abr_kind: AbrKind = AbrKind.EXACT
    abr_budget: int = 20_000
    rng_seed: int = 0
    rounds_per_iteration: int = 1
    invocations_per_round: int = 8
    meta_tol: float = 1e-8
    # tabular Q-learning
    q_batch: int = 256
    q_tau: float = 50.0
    q_explore_start: float = 1.0
    q_explore_end: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "abr_kind", AbrKind(self.abr_kind))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.max_population < 1:
            raise ValueError("max_population must be >= 1")
        if self.grid_resolution < 1:
            raise ValueError("grid_resolution must be >= 1")
        if self.abr_budget < 1:
            raise ValueError("abr_budget must be >= 1")
        if self.rounds_per_iteration < 0 or self.invocations_per_round < 0:
            raise ValueError("round counts must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["abr_kind"] = self.abr_kind.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown trainer settings: {sorted(unknown)}")
        return cls(**data)


def sample_opponent_prior(meta_graph, epsilon: float, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet point over the effective population w.p. ``epsilon``, else a uniformly chosen unique row."""
    meta_graph = np.asarray(meta_graph, dtype=np.float64)
    reps = unique_rows(meta_graph)
    if rng.random() < epsilon:
        sigma = np.zeros(meta_graph.shape[1])
        sigma[reps] = rng.dirichlet(np.full(len(reps), alpha))
        return sigma
    return meta_graph[reps[rng.integers(len(reps))]].copy()


def abr_exact(sigma, population) -> TabularPolicy:
    return best_response_to_mixture(population, sigma)[0]


@dataclass
class QState:
    q: np.ndarray
    visits: np.ndarray

    @classmethod
    def zeros(cls, spec: GameSpec) -> "QState":
        nd = infostate_table(spec.num_cards).num_decision
        return cls(np.zeros((nd, spec.num_cards)), np.zeros((nd, spec.num_cards)))


def _greedy(q: np.ndarray, legal: np.ndarray) -> np.ndarray:
    masked = np.where(legal, q, -np.inf)
    best = masked.max(axis=-1, keepdims=True)
    return np.argmax(masked >= best - TIE_TOL, axis=-1)


def abr_tabular_q(
    sigma,
    population,
    budget: int,
    rng: np.random.Generator,
    current: TabularPolicy | None = None,
    state: QState | None = None,
    *,
    batch: int = 256,
    tau: float = 50.0,
    explore_start: float = 1.0,
    explore_end: float = 0.05,
) -> TabularPolicy:
    """Episodic tabular Q-learning against the mixture ``sigma``, validated by exact evaluation.

    Each episode draws an opponent from ``sigma``; the learner explores
    epsilon-greedily with a linearly annealed rate and updates with step size
    ``1 / (1 + visits / tau)``.  Episodes run in synchronous batches.  The
    greedy policy is returned unless it does worse than ``current`` against
    the mixture, in which case ``current`` is kept.  ``state`` carries Q-values
    between calls and is updated in place.
    """
    policies = population.policies if isinstance(population, PopulationSnapshot) else list(population)
    sigma = check_mixture(sigma, len(policies))
    spec = policies[0].spec
    K = spec.num_cards
    table = infostate_table(K)
    if state is None:
        state = QState.zeros(spec)
    q, visits = state.q, state.visits
    stack = np.stack([p.probs for p in policies])
    support = np.flatnonzero(sigma > 0)
    weights = sigma[support] / sigma[support].sum()

    done = 0
    while done < budget:
        B = min(batch, budget - done)
        frac = (done + 0.5 * B) / budget
        explore = explore_start + (explore_end - explore_start) * frac
        opp = support[rng.choice(len(support), size=B, p=weights)]
        me = np.zeros(B, dtype=np.int64)
        them = np.zeros(B, dtype=np.int64)
        for t in range(K):
            legal = table.legal[me]
            greedy = _greedy(q[me], legal)
            random = np.argmax(rng.random((B, K)) * legal, axis=1)
            mine = np.where(rng.random(B) < explore, random, greedy)
            theirs = sample_columns(stack[opp, them], rng)
            w = np.sign(mine - theirs)
            nxt_me = table.child[me, mine, w + 1]
            target = w * float(K - t)
            if t < K - 1:
                target = target + np.where(table.legal[nxt_me], q[nxt_me], -np.inf).max(axis=1)
            flat = me * K + mine
            td = target - q[me, mine]
            count = np.bincount(flat, minlength=q.size).reshape(q.shape)
            total = np.bincount(flat, weights=td, minlength=q.size).reshape(q.shape)
            hit = count > 0
            visits[hit] += count[hit]
            q[hit] += total[hit] / count[hit] / (1.0 + visits[hit] / tau)
            me = nxt_me
            them = table.child[them, theirs, 1 - w]
        done += B

    probs = np.zeros_like(q)
    probs[np.arange(table.num_decision), _greedy(q, table.legal)] = 1.0
    learned = TabularPolicy(spec, probs)
    if current is not None and mixture_value(learned, policies, sigma) < mixture_value(current, policies, sigma):
        return current
    return learned


@dataclass
class IterationRecord:
    iteration: int
    population_size: int
    payoffs: np.ndarray
    meta_graph: np.ndarray
    frontier: np.ndarray
    gain: float
    expanded: bool

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "population_size": self.population_size,
            "payoffs": self.payoffs.tolist(),
            "meta_graph": self.meta_graph.tolist(),
            "frontier": self.frontier.tolist(),
            "gain": float(self.gain),
            "expanded": bool(self.expanded),
        }


@dataclass
class SimplexTrainer:
    config: TrainerConfig
    spec: GameSpec
    policies: list = field(default_factory=list)
    store: ConditionalPolicyStore = None
    history: list = field(default_factory=list)
    rounds: int = 0
    finished: bool = False

    def __post_init__(self):
        if not self.policies:
            self.policies = [uniform_random_policy(self.spec)]
        if self.store is None:
            self.store = ConditionalPolicyStore(len(self.policies))
        self._q: dict[tuple, QState] = {}

    # ------------------------------------------------------------------ state

    def meta_state(self) -> tuple[np.ndarray, np.ndarray]:
        U = eval_payoff_matrix(self.policies)
        return U, psro_nash_meta_graph(U, self.config.meta_tol)

    def snapshot(self) -> PopulationSnapshot:
        U, sigma = self.meta_state()
        return PopulationSnapshot(self.spec, tuple(self.policies), sigma, U)

    def effective(self, meta_graph=None) -> list[int]:
        if meta_graph is None:
            meta_graph = self.meta_state()[1]
        return unique_rows(meta_graph)

    def grid(self, meta_graph) -> AnchorGrid | None:
        """Anchor grid over the effective population, or ``None`` when ``epsilon`` is 0."""
        if self.config.epsilon <= 0:
            return None
        return AnchorGrid(tuple(int(i) for i in unique_rows(meta_graph)), len(self.policies), self.config.grid_resolution)

    def uninformed_anchor(self, meta_graph) -> tuple[float, ...]:
        return canonical_anchor(uniform_over(unique_rows(meta_graph), len(self.policies)))

    def simplex_anchors(self, meta_graph) -> list[tuple[float, ...]]:
        """Simplex anchors held explicitly: the uniform point plus grid points already trained."""
        grid = self.grid(meta_graph)
        if grid is None:
            return []
        held = {a for a in self.store.anchors() if grid.contains(a)}
        held.add(self.uninformed_anchor(meta_graph))
        return sorted(held)

    def snap(self, sigma, meta_graph) -> tuple[float, ...]:
        """Nearest simplex anchor to a sampled prior: the uniform point or a grid point."""
        grid = self.grid(meta_graph)
        pool = [self.uninformed_anchor(meta_graph)]
        if grid is not None:
            pool.append(grid.nearest(sigma))
        return nearest_anchor(canonical_anchor(sigma), pool)

    def _row_anchors(self, meta_graph) -> dict[tuple, list[int]]:
        """Anchor -> trainable slots (index >= 1) whose meta-graph row it is."""
        rows: dict[tuple, list[int]] = {}
        for i in range(1, meta_graph.shape[0]):
            rows.setdefault(canonical_anchor(meta_graph[i]), []).append(i)
        return rows

    def _sync_store(self, meta_graph):
        rows = self._row_anchors(meta_graph)
        for anchor, slots in rows.items():
            self.store.put(anchor, self.policies[slots[0]])
        keep = set(rows) | set(self.simplex_anchors(meta_graph))
        self.store.retain(keep)
        self.store.grid = self.grid(meta_graph)
        self._q = {a: s for a, s in self._q.items() if a in keep}

    # --------------------------------------------------------------- training

    def _abr(self, anchor, policies, current, rng, budget_scale: int = 1) -> TabularPolicy:
        cfg = self.config
        sigma = np.asarray(anchor)
        sigma = sigma / sigma.sum()
        if cfg.abr_kind is AbrKind.EXACT:
            return abr_exact(sigma, policies)
        if current is None:
            current = self.store.lookup(anchor) if len(self.store) else policies[0]
        state = self._q.setdefault(anchor, QState.zeros(self.spec))
        return abr_tabular_q(
            sigma,
            policies,
            cfg.abr_budget * budget_scale,
            rng,
            current=current,
            state=state,
            batch=cfg.q_batch,
            tau=cfg.q_tau,
            explore_start=cfg.q_explore_start,
            explore_end=cfg.q_explore_end,
        )

    def _train_targets(self, targets: dict, meta_graph, label):
        """Train each anchor against the current (frozen) population, then write at the barrier."""
        policies = list(self.policies)
        rows = self._row_anchors(meta_graph)
        results = {}
        for anchor in sorted(targets):
            slots = rows.get(anchor, [])
            current = policies[slots[0]] if slots else self.store.get(anchor)
            rng = fork_rng(self.config.rng_seed, label, self.rounds, *_anchor_label(anchor))
            results[anchor] = self._abr(anchor, policies, current, rng, targets[anchor])
        for anchor, policy in results.items():
            self.store.put(anchor, policy)
            for i in rows.get(anchor, []):
                self.policies[i] = policy
        self.rounds += 1

    def run_round(self):
        cfg = self.config
        meta_graph = self.meta_state()[1]
        self._sync_store(meta_graph)
        row_values = {canonical_anchor(r) for r in meta_graph}
        targets: dict[tuple, int] = {}
        for k in range(cfg.invocations_per_round):
            rng = fork_rng(cfg.rng_seed, "prior", self.rounds, k)
            sigma = sample_opponent_prior(meta_graph, cfg.epsilon, cfg.alpha, rng)
            anchor = canonical_anchor(sigma)
            if anchor not in row_values:
                anchor = self.snap(sigma, meta_graph)
            targets[anchor] = targets.get(anchor, 0) + 1
        self._train_targets(targets, meta_graph, "round")
        self._sync_store(self.meta_state()[1])

    def step(self) -> IterationRecord:
        """Rounds of ABR training, then the frontier best response and expansion test."""
        cfg = self.config
        for _ in range(cfg.rounds_per_iteration):
            self.run_round()
        U, meta_graph = self.meta_state()
        frontier = solve_zero_sum_nash(U, cfg.meta_tol).strategy
        anchor = canonical_anchor(frontier)
        rng = fork_rng(cfg.rng_seed, "frontier", len(self.history))
        candidate = self._abr(anchor, self.policies, self.store.get(anchor), rng)
        gain = mixture_value(candidate, self.policies, frontier)
        expand = gain > cfg.br_gain_threshold and len(self.policies) < cfg.max_population
        record = IterationRecord(len(self.history), len(self.policies), U, meta_graph, frontier, gain, expand)
        self.history.append(record)
        if expand:
            self.policies.append(candidate)
            self.store.expand(len(self.policies))
            self._q = {a + (0.0,): s for a, s in self._q.items()}
            self._sync_store(self.meta_state()[1])
        else:
            self.finish()
        return record

    def finish(self):
        """Train every held anchor once against the final population.

        Small grids are trained in full.  With the exact oracle the remaining
        grid points are filled lazily on lookup; the learner leaves them to the
        nearest trained anchor.
        """
        meta_graph = self.meta_state()[1]
        self._sync_store(meta_graph)
        targets = {a: 1 for a in self._row_anchors(meta_graph)}
        targets.update({a: 1 for a in self.simplex_anchors(meta_graph)})
        grid = self.grid(meta_graph)
        if grid is not None and grid.size() <= EAGER_LIMIT:
            targets.update({a: 1 for a in grid.points()})
        self._train_targets(targets, meta_graph, "sweep")
        self._sync_store(self.meta_state()[1])
        if self.config.abr_kind is AbrKind.EXACT:
            attach_exact_fill(self.store, self.policies)
        self.finished = True

    def run(self):
        while not self.finished:
            self.step()
        return self


def attach_exact_fill(store: ConditionalPolicyStore, population):
    """Let ``store`` answer untrained grid points with exact best responses to ``population``."""
    policies = list(population.policies if isinstance(population, PopulationSnapshot) else population)
    store.fill = lambda sigma: abr_exact(sigma, policies)
    return store


def _anchor_label(anchor) -> tuple[int, ...]:
    return tuple(int(round(x * 10**ANCHOR_DECIMALS)) for x in anchor)


def train(config: TrainerConfig, spec: GameSpec):
    """Run the full loop; returns ``(snapshot, store, history)``."""
    trainer = SimplexTrainer(config, spec).run()
    return trainer.snapshot(), trainer.store, trainer.history
