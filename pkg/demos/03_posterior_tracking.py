# %% [markdown]
# # Tracking who the opponent is
#
# The uninformed policy plays against a hidden member of the population.
# After every turn it sees its own bid and the outcome. Bayes' rule over
# the opponent bid sequences consistent with those outcomes gives an exact
# posterior over which member it faces.

# %%
import numpy as np

from simplexpop import (
    GameSpec,
    TrainerConfig,
    initial_posterior,
    jsd_matrix,
    posterior_update,
    posterior_weighted_divergence,
    train,
    unique_rows,
)
from simplexpop.rollout import simulate
from simplexpop.store import uniform_over

spec = GameSpec(5)
snap, store, _ = train(TrainerConfig(epsilon=0.5, grid_resolution=8, rng_seed=0), spec)
n = len(snap)
player = store.lookup(uniform_over(unique_rows(snap.meta_graph), n))
stack = np.stack([p.probs for p in snap.policies])

# %% [markdown]
# ## One episode, turn by turn

# %%
rng = np.random.default_rng(3)
truth = n - 1
eps = simulate(player.probs[None], np.zeros(1, dtype=np.int64), stack, np.array([truth]), rng)
state = initial_posterior(np.full(n, 1 / n), snap)
print("turn 0:", np.round(state.posterior, 3))
for t in range(spec.num_cards):
    state = posterior_update(state, int(eps.actions0[0, t]), int(eps.outcomes[0, t]), snap)
    print(f"turn {t + 1}: bid {eps.actions0[0, t]}, outcome {eps.outcomes[0, t]:+d} ->", np.round(state.posterior, 3))
print("true opponent:", truth)

# %% [markdown]
# ## Calibration over many episodes
#
# Averaged over episodes, the posterior mass on the true opponent can only
# grow from turn to turn.

# %%
episodes = 500
truth = rng.integers(n, size=episodes)
eps = simulate(player.probs[None], np.zeros(episodes, dtype=np.int64), stack, truth, rng)
mass = np.zeros(spec.num_cards + 1)
for e in range(episodes):
    state = initial_posterior(np.full(n, 1 / n), snap)
    mass[0] += state.posterior[truth[e]]
    for t in range(spec.num_cards):
        state = posterior_update(state, int(eps.actions0[e, t]), int(eps.outcomes[e, t]), snap)
        mass[t + 1] += state.posterior[truth[e]]
print("mean mass on the true opponent by turn:", np.round(mass / episodes, 3))

# %% [markdown]
# ## Posterior-weighted behavioural divergence
#
# `D[i, j]` is the Jensen-Shannon divergence between policies i and j along
# i's own play. Weighting column j by the posterior shows how far the
# believed opponent is from the real one. The weighted value falls as the
# evidence accumulates.

# %%
D = jsd_matrix(snap, snap, 256, rng).values
curve = posterior_weighted_divergence(D, snap, snap.policies[n - 1], n - 1, 500, rng, row_policy=player)
print("posterior-weighted divergence by turn:", np.round(curve.weighted, 4))
