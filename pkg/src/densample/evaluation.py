"""Dual-metric model evaluation and the multi-iteration experiment harness.

Error is always reported twice: over the full test set and over its most
underrepresented fraction (largest mean distance to the k nearest test
neighbours). A model tuned to dense regions looks good on the first number
and poor on the second; reporting both is the point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset import (
    Dataset,
    SplitSpec,
    apply_standardization,
    fit_standardization,
    train_test_split,
)
from .errors import ValidationError
from .neighbors import build_index, mean_knn_distances
from .regression import LinearModel, fit_ols, predict
from .sampling import STRATEGY_RANDOM, draw_sample

BASELINE_LABEL = "all"

_QUANTILE_KEYS = ("min", "q1", "median", "q3", "max")


@dataclass(frozen=True)
class EvaluationReport:
    """One model's per-row residuals and both RMSE metrics on a test set."""

    strategy: str
    seed: int
    overall_rmse: float
    underrepresented_rmse: float
    subset_fraction: float
    row_ids: np.ndarray
    truths: np.ndarray
    predictions: np.ndarray
    residuals: np.ndarray
    subset_row_ids: np.ndarray

    def per_row(self):
        """Iterate (row_id, truth, prediction, residual) tuples."""
        for values in zip(self.row_ids, self.truths, self.predictions, self.residuals):
            yield (int(values[0]), float(values[1]), float(values[2]), float(values[3]))


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    reports: tuple[EvaluationReport, ...]
    quantiles: dict

    def metric_values(self, metric: str) -> np.ndarray:
        return np.asarray([getattr(r, metric) for r in self.reports])


@dataclass(frozen=True)
class ExperimentSummary:
    results: tuple[StrategyResult, ...]
    iterations: int
    base_seed: int
    subset_fraction: float

    def result_for(self, strategy: str) -> StrategyResult:
        for result in self.results:
            if result.strategy == strategy:
                return result
        raise KeyError(f"no results for strategy {strategy!r}")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "base_seed": self.base_seed,
            "subset_fraction": self.subset_fraction,
            "strategies": {
                result.strategy: {
                    "iterations": [
                        {
                            "seed": report.seed,
                            "overall_rmse": report.overall_rmse,
                            "underrepresented_rmse": report.underrepresented_rmse,
                        }
                        for report in result.reports
                    ],
                    "quantiles": result.quantiles,
                }
                for result in self.results
            },
        }


def rmse(truth, predictions) -> float:
    """Root mean squared error."""
    truth = np.asarray(truth, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if truth.shape != predictions.shape or truth.ndim != 1:
        raise ValueError("truth and predictions must be equal-length vectors")
    if truth.size == 0:
        raise ValueError("rmse of an empty vector is undefined")
    return float(np.sqrt(np.mean((truth - predictions) ** 2)))


def select_underrepresented(
    test: Dataset,
    fraction: float = 0.10,
    k: int = 100,
    reference: Dataset | None = None,
) -> np.ndarray:
    """Row ids of the ceil(fraction * n) least-represented test rows.

    Representation is measured by the mean distance to the k nearest rows
    of the reference set (the test set itself by default, self excluded).
    Ties at the cutoff resolve toward the lower row id. Returns ids sorted
    ascending. Pass features in the representation used for distances
    (standardized, in the standard pipeline).
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError("fraction must be strictly between 0 and 1")
    count = math.ceil(fraction * test.n)
    if reference is None:
        if k >= test.n:
            raise ValidationError(
                f"k={k} must be below the test size {test.n} for self-scoring"
            )
        index = build_index(test.features)
        scores = mean_knn_distances(index, test.features, k, exclude_self=True)
    else:
        if k > reference.n:
            raise ValidationError(f"k={k} exceeds the reference size {reference.n}")
        index = build_index(reference.features)
        scores = mean_knn_distances(index, test.features, k, exclude_self=False)
    order = np.lexsort((test.row_ids, -scores))[:count]
    return np.sort(test.row_ids[order])


def evaluate_model(
    model: LinearModel,
    test: Dataset,
    subset_row_ids,
    strategy: str,
    seed: int = 0,
    subset_fraction: float = 0.10,
) -> EvaluationReport:
    """Score one model on a test set, overall and on the given subset."""
    subset_row_ids = np.asarray(subset_row_ids, dtype=np.int64)
    predictions = predict(model, test)
    residuals = test.target - predictions
    mask = np.isin(test.row_ids, subset_row_ids)
    if mask.sum() != subset_row_ids.size:
        raise ValidationError("subset_row_ids include ids not present in the test set")
    return EvaluationReport(
        strategy=strategy,
        seed=seed,
        overall_rmse=rmse(test.target, predictions),
        underrepresented_rmse=rmse(test.target[mask], predictions[mask]),
        subset_fraction=subset_fraction,
        row_ids=test.row_ids.copy(),
        truths=test.target.copy(),
        predictions=predictions,
        residuals=residuals,
        subset_row_ids=subset_row_ids.copy(),
    )


def residual_winner_map(
    report_a: EvaluationReport,
    report_b: EvaluationReport,
    tie_tolerance: float = 1e-12,
) -> list[tuple[int, str]]:
    """Per row, which report has the smaller absolute residual.

    Returns (row_id, winner) pairs in report_a's row order with winner in
    {"a", "b", "tie"}; a tie is declared when the absolute residuals agree
    within ``tie_tolerance``.
    """
    if report_a.row_ids.shape != report_b.row_ids.shape or not np.array_equal(
        np.sort(report_a.row_ids), np.sort(report_b.row_ids)
    ):
        raise ValidationError("reports cover different row id sets")
    order_b = np.argsort(report_b.row_ids)
    aligned_b = order_b[np.searchsorted(report_b.row_ids[order_b], report_a.row_ids)]
    abs_a = np.abs(report_a.residuals)
    abs_b = np.abs(report_b.residuals[aligned_b])
    winners = np.where(abs_a < abs_b, "a", "b").astype("<U3")
    winners[np.abs(abs_a - abs_b) <= tie_tolerance] = "tie"
    return [(int(i), str(w)) for i, w in zip(report_a.row_ids, winners)]


def _quantiles(values: np.ndarray) -> dict:
    points = np.percentile(values, [0, 25, 50, 75, 100])
    return {key: float(v) for key, v in zip(_QUANTILE_KEYS, points)}


def _strategy_result(strategy: str, reports: list[EvaluationReport]) -> StrategyResult:
    return StrategyResult(
        strategy=strategy,
        reports=tuple(reports),
        quantiles={
            "overall_rmse": _quantiles(
                np.asarray([r.overall_rmse for r in reports])
            ),
            "underrepresented_rmse": _quantiles(
                np.asarray([r.underrepresented_rmse for r in reports])
            ),
        },
    )


def run_experiment(
    train: Dataset,
    test: Dataset,
    plans,
    iterations: int,
    base_seed: int,
    *,
    subset_fraction: float = 0.10,
    k_subset: int = 100,
    standardize: bool = True,
    include_baseline: bool = True,
) -> ExperimentSummary:
    """Fit and score the all-data baseline plus every sampling strategy.

    For each plan and iteration i the sample is drawn with seed
    ``base_seed XOR i``, a model is fitted on it, and both metrics are
    computed on the fixed test set. The baseline model is deterministic, so
    it is fitted once and replicated across iterations. Fully reproducible
    for a given ``base_seed``.
    """
    if iterations < 1:
        raise ValidationError("iterations must be at least 1")
    if np.intersect1d(train.row_ids, test.row_ids).size:
        raise ValidationError("train and test share row ids; the split must be disjoint")
    plans = list(plans)
    labels = [plan.strategy for plan in plans]
    if len(set(labels)) != len(labels):
        raise ValidationError("each strategy may appear only once per experiment")

    if standardize:
        params = fit_standardization(train)
        train_rep = apply_standardization(train, params)
        test_rep = apply_standardization(test, params)
    else:
        train_rep, test_rep = train, test
    needs_index = any(plan.strategy != STRATEGY_RANDOM for plan in plans)
    index = build_index(train_rep.features) if needs_index else None

    subset_ids = select_underrepresented(test_rep, subset_fraction, k_subset)

    results = []
    if include_baseline:
        baseline_model = fit_ols(train)
        reports = [
            evaluate_model(
                baseline_model,
                test,
                subset_ids,
                BASELINE_LABEL,
                seed=base_seed ^ i,
                subset_fraction=subset_fraction,
            )
            for i in range(iterations)
        ]
        results.append(_strategy_result(BASELINE_LABEL, reports))

    for plan in plans:
        reports = []
        for i in range(iterations):
            seed = base_seed ^ i
            sampled = draw_sample(train, plan.with_seed(seed), index)
            model = fit_ols(sampled.dataset)
            reports.append(
                evaluate_model(
                    model,
                    test,
                    subset_ids,
                    plan.strategy,
                    seed=seed,
                    subset_fraction=subset_fraction,
                )
            )
        results.append(_strategy_result(plan.strategy, reports))

    return ExperimentSummary(
        results=tuple(results),
        iterations=iterations,
        base_seed=base_seed,
        subset_fraction=subset_fraction,
    )


def run_resplit_experiment(
    dataset: Dataset,
    split: SplitSpec,
    plans,
    iterations: int,
    base_seed: int,
    **kwargs,
) -> ExperimentSummary:
    """Experiment variant that re-randomizes the train/test split per iteration.

    Iteration i splits with seed ``split.seed XOR i`` before sampling, so
    even the all-data baseline shows spread across iterations. Metrics from
    different iterations then refer to different test sets; quantiles still
    summarize them strategy by strategy.
    """
    if iterations < 1:
        raise ValidationError("iterations must be at least 1")
    per_strategy: dict[str, list[EvaluationReport]] = {}
    order: list[str] = []
    for i in range(iterations):
        train, test = train_test_split(dataset, replace(split, seed=split.seed ^ i))
        summary = run_experiment(
            train, test, plans, 1, base_seed ^ i, **kwargs
        )
        for result in summary.results:
            if result.strategy not in per_strategy:
                per_strategy[result.strategy] = []
                order.append(result.strategy)
            per_strategy[result.strategy].extend(result.reports)
    results = tuple(
        _strategy_result(strategy, per_strategy[strategy]) for strategy in order
    )
    return ExperimentSummary(
        results=results,
        iterations=iterations,
        base_seed=base_seed,
        subset_fraction=kwargs.get("subset_fraction", 0.10),
    )
