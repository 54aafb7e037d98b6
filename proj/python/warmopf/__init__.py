"""Learned warm starts for AC optimal power flow."""

from pathlib import Path

from ._core import (
    Case,
    Dataset,
    Forest,
    Hyperparams,
    WarmopfError,
    feature_names,
    fit_forest,
    fit_forest_on,
    generate,
    load_case,
    load_dataset,
    load_features,
    load_model,
    parse_case,
    r2_per_target,
    relative_error,
    row_mismatch,
    save_dataset,
    solve,
    split,
    target_names,
)

__all__ = [
    "Case",
    "Dataset",
    "Forest",
    "Hyperparams",
    "WarmopfError",
    "feature_names",
    "fit_forest",
    "fit_forest_on",
    "generate",
    "load_case",
    "load_dataset",
    "load_features",
    "load_model",
    "parse_case",
    "r2_per_target",
    "relative_error",
    "row_mismatch",
    "save_dataset",
    "solve",
    "split",
    "target_names",
    "predict_start",
]


def predict_start(model: Forest, case: Case, **solve_args):
    """Solve `case` from the start predicted by `model` for the case's own loads."""
    prediction = model.predict([load_features(case)])[0]
    return solve(case, start="learned", prediction=list(prediction), **solve_args)
