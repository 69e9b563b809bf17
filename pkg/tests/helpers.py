import numpy as np

from simplexpop.game import infostate_table
from simplexpop.policy import TabularPolicy


def random_policy(spec, rng, sparsity=0.0):
    """Random behavioural policy; ``sparsity`` zeroes that share of legal entries."""
    table = infostate_table(spec.num_cards)
    raw = rng.random((table.num_decision, spec.num_cards)) * table.legal
    raw[rng.random(raw.shape) < sparsity] = 0.0
    empty = raw.sum(axis=1) == 0
    raw[empty] = table.legal[empty]
    return TabularPolicy(spec, raw / raw.sum(axis=1, keepdims=True))
