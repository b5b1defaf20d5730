"""Dampened Mann iteration for simple stochastic games."""

from ._mannfix import (
    BudgetExceeded,
    InvalidModel,
    Player,
    Sampler,
    Scheme,
    Ssg,
    bellman_apply,
    classify_chain,
    exact_value,
    generate_game,
    iterate_game,
    iterate_scalar,
    k_step_apply,
    kleene,
    load_model,
    mann_step,
    parse_model,
    run_experiment,
    split_state_action,
    state_action_bellman_apply,
    synthesize_scheme,
    table_scheme,
)

__all__ = [
    "BudgetExceeded",
    "InvalidModel",
    "Player",
    "Sampler",
    "Scheme",
    "Ssg",
    "bellman_apply",
    "classify_chain",
    "exact_value",
    "generate_game",
    "iterate_game",
    "iterate_scalar",
    "k_step_apply",
    "kleene",
    "load_model",
    "mann_step",
    "parse_model",
    "run_experiment",
    "split_state_action",
    "state_action_bellman_apply",
    "synthesize_scheme",
    "table_scheme",
]
