"""Mixture of latent trait analyzers for bipartite networks."""

from ._core import (
    FitResult,
    ModelSpec,
    Parameters,
    SelectionRecord,
    SelectionTable,
    StartRecord,
    dependence_matrix,
    fit,
    jackknife_se,
    load_matrix,
    log_lift_matrix,
    loglik,
    median_actor_prob,
    memberships,
    params_from_json,
    params_to_json,
    select,
    simulate,
)

__all__ = [
    "FitResult",
    "ModelSpec",
    "Parameters",
    "SelectionRecord",
    "SelectionTable",
    "StartRecord",
    "dependence_matrix",
    "fit",
    "jackknife_se",
    "load_matrix",
    "log_lift_matrix",
    "loglik",
    "median_actor_prob",
    "memberships",
    "params_from_json",
    "params_to_json",
    "select",
    "simulate",
]
