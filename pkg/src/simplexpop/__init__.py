"""Population learning over the mixture simplex for goofspiel, with exact tabular policies."""

from .best_response import (
    best_response_to_mixture,
    brute_force_best_response,
    exact_best_response,
    expected_value,
    mixture_value,
)
from .evaluation import (
    any_mixture_experiment,
    entropy,
    exploitability,
    jsd_matrix,
    posterior_weighted_divergence,
    rpp,
)
from .game import GameSpec, TieRule, apply_joint_action, enumerate_infostates, infostate_key, new_game, terminal_return
from .meta import eval_payoff_matrix, psro_nash_meta_graph, solve_zero_sum_nash, unique_rows
from .policy import (
    PopulationSnapshot,
    TabularPolicy,
    aggregate_mixture,
    point_matching_policy,
    sacrifice_top_policy,
    uniform_random_policy,
)
from .posterior import batch_posterior, initial_posterior, posterior_update
from .store import ConditionalPolicyStore, lookup_conditional
from .trainer import AbrKind, SimplexTrainer, TrainerConfig, train

__version__ = "0.1.0"
