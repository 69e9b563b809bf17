# %% [markdown]
# # Goofspiel and exact best responses
#
# Each player holds bid cards 1..K. At turn t the prize is worth K - t points.
# Both players bid at once: the higher bid takes the prize, a tie discards it.
# A player sees only its own bids and whether each turn was won, lost or drawn.
# That information state is all a tabular policy conditions on.

# %%
import numpy as np

from simplexpop import (
    GameSpec,
    TabularPolicy,
    brute_force_best_response,
    exact_best_response,
    expected_value,
    point_matching_policy,
    sacrifice_top_policy,
    uniform_random_policy,
)
from simplexpop.game import infostate_table

for K in (2, 3, 4, 5):
    table = infostate_table(K)
    print(f"K={K}: {table.num_decision} decision information states")

# %% [markdown]
# ## Three reference policies
#
# Point matching bids the card equal to the prize. Sacrifice-top throws
# its lowest card at the top prize and then outbids point matching by one
# on every later prize. Uniform random bids any remaining card.

# %%
spec = GameSpec(5)
u, pm, st = uniform_random_policy(spec), point_matching_policy(spec), sacrifice_top_policy(spec)
print("J(point matching, uniform)  =", expected_value(pm, u))
print("J(sacrifice-top, matching)  =", expected_value(st, pm))
print(f"J(uniform, uniform)         = {expected_value(u, u):.12f}")

# %% [markdown]
# ## Best responses by backward induction
#
# `exact_best_response` groups terminal histories by the responder's
# information states, weights them by the opponent's reach, and picks the
# best bid bottom-up. Ties go to the lowest bid, which makes the result
# deterministic.

# %%
br_u, v_u = exact_best_response(u)
br_pm, v_pm = exact_best_response(pm)
print(f"BR value vs uniform        = {v_u:.6f}  (point matching already attains it)")
print(f"BR value vs point matching = {v_pm:.6f}  (sacrifice-top attains it)")

# %% [markdown]
# At K=3 the pure-strategy space is small enough to enumerate, which gives
# an independent check on the backward induction.

# %%
rng = np.random.default_rng(0)
small = GameSpec(3)
table = infostate_table(3)
worst = 0.0
for _ in range(20):
    raw = rng.random((table.num_decision, 3)) * table.legal
    opp = TabularPolicy(small, raw / raw.sum(axis=1, keepdims=True))
    worst = max(worst, abs(exact_best_response(opp)[1] - brute_force_best_response(opp)[1]))
print(f"max disagreement over 20 random K=3 opponents: {worst:.2e}")
