"""Ordinary least squares with intercept."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .dataset import Dataset


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    training_n: int
    feature_names: tuple[str, ...]

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", coefficients)
        if coefficients.ndim != 1 or coefficients.shape[0] != len(self.feature_names):
            raise ValueError("one coefficient per feature name required")
        if not np.isfinite(coefficients).all() or not np.isfinite(self.intercept):
            raise ValueError("model parameters must be finite")


def _dependent_columns(design: np.ndarray, names: list[str], rank: int) -> list[str]:
    # pivoted QR pushes the linearly dependent columns to the back
    _, _, pivots = scipy.linalg.qr(design, mode="economic", pivoting=True)
    return [names[j] for j in sorted(pivots[rank:])]


def fit_ols(train: Dataset, allow_rank_deficient: bool = False) -> LinearModel:
    """Fit y ~ intercept + X b by least squares (SVD-based solver).

    Raises on rank deficiency unless ``allow_rank_deficient`` is set, in
    which case the minimum-norm solution is returned. Repeated rows are
    legal and act as weights, so samples drawn with replacement feed
    straight into an unweighted fit.
    """
    n, p = train.features.shape
    if n < p + 1:
        raise ValueError(f"need at least p+1={p + 1} rows to fit, have {n}")
    design = np.column_stack([np.ones(n), train.features])
    solution, _, rank, _ = np.linalg.lstsq(design, train.target, rcond=None)
    if rank < p + 1 and not allow_rank_deficient:
        names = ["(intercept)"] + list(train.feature_names)
        dependent = _dependent_columns(design, names, rank)
        raise ValueError(
            f"design matrix is rank deficient (rank {rank} of {p + 1}); "
            f"linearly dependent columns: {dependent}"
        )
    return LinearModel(
        intercept=float(solution[0]),
        coefficients=solution[1:],
        training_n=n,
        feature_names=train.feature_names,
    )


def predict(model: LinearModel, features) -> np.ndarray:
    """Evaluate intercept + X b. Accepts a matrix or a Dataset.

    A Dataset's feature names must match the model's binding order exactly;
    a bare matrix is checked for column count only.
    """
    if isinstance(features, Dataset):
        if features.feature_names != model.feature_names:
            raise ValueError(
                "dataset feature names do not match the model's "
                f"({features.feature_names} vs {model.feature_names})"
            )
        matrix = features.features
    else:
        matrix = np.asarray(features, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != model.coefficients.shape[0]:
            raise ValueError(
                f"feature matrix must have {model.coefficients.shape[0]} columns"
            )
    return model.intercept + matrix @ model.coefficients


def save_model(model: LinearModel, path) -> None:
    """Write the model as JSON (names, intercept, coefficients, training_n)."""
    payload = {
        "feature_names": list(model.feature_names),
        "intercept": model.intercept,
        "coefficients": [float(c) for c in model.coefficients],
        "training_n": model.training_n,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path) -> LinearModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return LinearModel(
        intercept=float(payload["intercept"]),
        coefficients=np.asarray(payload["coefficients"], dtype=np.float64),
        training_n=int(payload["training_n"]),
        feature_names=tuple(payload["feature_names"]),
    )
