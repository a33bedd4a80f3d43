"""Tabular regression data: CSV ingestion, column filtering, scaling, splitting.

A :class:`Dataset` is an immutable bundle of a numeric covariate matrix, a
numeric target vector, column names, and stable row ids. All operations here
are pure: they return new datasets and never mutate their inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ValidationError
from .util import round_half_up


@dataclass(frozen=True)
class Dataset:
    """n rows of p covariates plus one target value per row.

    ``row_ids`` are stable opaque identifiers (original row numbers for data
    loaded from CSV) preserved by filtering, scaling, and splitting, so rows
    can be traced through a whole pipeline. ``batch_labels`` is optional
    provenance metadata (e.g. production batch numbers); it never enters any
    computation except the batch-grouped split and report exports.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    row_ids: np.ndarray
    batch_labels: np.ndarray | None = None
    target_name: str = "target"

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64)
        row_ids = np.asarray(self.row_ids, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "row_ids", row_ids)
        if features.ndim != 2:
            raise ValidationError("features must be a 2-D matrix")
        n, p = features.shape
        if n < 1 or p < 1:
            raise ValidationError("dataset needs at least one row and one column")
        if target.shape != (n,):
            raise ValidationError(f"target length {target.shape} does not match n={n}")
        if len(self.feature_names) != p:
            raise ValidationError(
                f"{len(self.feature_names)} feature names for {p} columns"
            )
        if len(set(self.feature_names)) != p:
            raise ValidationError("feature names must be unique")
        if row_ids.shape != (n,):
            raise ValidationError("row_ids length does not match n")
        if len(np.unique(row_ids)) != n:
            raise ValidationError("row_ids must be unique")
        if self.batch_labels is not None:
            labels = np.asarray(self.batch_labels, dtype=np.int64)
            object.__setattr__(self, "batch_labels", labels)
            if labels.shape != (n,):
                raise ValidationError("batch_labels length does not match n")
        if not np.isfinite(target).all():
            raise ValidationError("target contains non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def take(self, positions) -> "Dataset":
        """Return the sub-dataset at the given row positions (ids preserved)."""
        positions = np.asarray(positions, dtype=np.int64)
        return Dataset(
            features=self.features[positions],
            target=self.target[positions],
            feature_names=self.feature_names,
            row_ids=self.row_ids[positions],
            batch_labels=None
            if self.batch_labels is None
            else self.batch_labels[positions],
            target_name=self.target_name,
        )


@dataclass(frozen=True)
class StandardizationParams:
    """Per-column means and sample standard deviations (divisor n-1)."""

    means: np.ndarray
    standard_deviations: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        sds = np.asarray(self.standard_deviations, dtype=np.float64)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "standard_deviations", sds)
        if means.ndim != 1 or means.shape != sds.shape:
            raise ValidationError("means and standard deviations must be 1-D and equal length")
        if not (sds > 0).all():
            raise ValidationError("standard deviations must be strictly positive")


@dataclass(frozen=True)
class SplitSpec:
    """How to partition a dataset into train and test."""

    test_fraction: float
    seed: int
    mode: str = "row-random"

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError("test_fraction must be strictly between 0 and 1")
        if self.mode not in ("row-random", "batch-grouped"):
            raise ValidationError(f"unknown split mode {self.mode!r}")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


@dataclass(frozen=True)
class IngestionConfig:
    """Which CSV columns to use.

    ``selected_columns=None`` means every column except the target, the batch
    column, and any force-excluded columns. When given, the listed order
    defines the feature order.
    """

    target_column: str
    selected_columns: tuple[str, ...] | None = None
    excluded_columns: tuple[str, ...] = ()
    batch_column: str | None = None
    row_id_column: str | None = None


@dataclass(frozen=True)
class FilterReport:
    """Columns dropped by :func:`filter_columns`, with the reason for each."""

    dropped: tuple[tuple[str, str], ...] = field(default=())

    @property
    def dropped_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dropped)


def _read_header(path: Path) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty, expected a header row")
    return header


def load_csv(
    path,
    target_column: str,
    *,
    selected_columns=None,
    excluded_columns=(),
    batch_column: str | None = None,
    row_id_column: str | None = None,
) -> Dataset:
    """Load a numeric regression table from CSV.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row, UTF-8, '.' decimal separator. Empty
        cells denote missing values and load as NaN (drop the affected
        columns with :func:`filter_columns` before any computation).
    target_column : str
        Name of the response column. Must parse to finite numbers in every
        row.
    selected_columns : sequence of str, optional
        Covariate columns to keep, in this order. Default: all columns
        except target, batch, and exclusions, in file order.
    excluded_columns : sequence of str, optional
        Columns to drop unconditionally (e.g. spectral channels).
    batch_column : str, optional
        Integer provenance column stored as ``batch_labels``.
    row_id_column : str, optional
        Integer column of unique row ids to restore (for tables previously
        exported with ids, so rows can be joined back to other exports).
        Default: rows are numbered 0..n-1 in file order.

    Raises
    ------
    ValidationError
        Missing file, duplicate header names, missing target column, or a
        non-numeric cell (reported with row number and column name).
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"input file not found: {path}")
    header = _read_header(path)
    dupes = {name for name in header if header.count(name) > 1}
    if dupes:
        raise ValidationError(f"{path}: duplicate column names {sorted(dupes)}")
    if target_column not in header:
        raise ValidationError(
            f"{path}: target column {target_column!r} not found in header"
        )

    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")

    def parse_numeric(column: str, allow_missing: bool) -> np.ndarray:
        raw = frame[column].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna() & (raw != "")
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ValidationError(
                f"{path}: non-numeric value {raw.iloc[row]!r} in column "
                f"{column!r}, data row {row + 1}"
            )
        if not allow_missing and values.isna().any():
            row = int(np.flatnonzero(values.isna().to_numpy())[0])
            raise ValidationError(
                f"{path}: missing value in column {column!r}, data row {row + 1}"
            )
        out = values.to_numpy(dtype=np.float64)
        out[raw.to_numpy() == ""] = np.nan
        return out

    if len(frame) == 0:
        raise ValidationError(f"{path}: no data rows")

    reserved = {target_column}
    if batch_column is not None:
        if batch_column not in header:
            raise ValidationError(f"{path}: batch column {batch_column!r} not found")
        reserved.add(batch_column)
    if row_id_column is not None:
        if row_id_column not in header:
            raise ValidationError(f"{path}: row id column {row_id_column!r} not found")
        reserved.add(row_id_column)
    excluded = set(excluded_columns)

    if selected_columns is None:
        names = [c for c in header if c not in reserved and c not in excluded]
    else:
        names = list(selected_columns)
        missing = [c for c in names if c not in header]
        if missing:
            raise ValidationError(f"{path}: selected columns not found: {missing}")
        overlap = [c for c in names if c in reserved]
        if overlap:
            raise ValidationError(
                f"{path}: selected columns overlap target/batch: {overlap}"
            )
        names = [c for c in names if c not in excluded]
    if not names:
        raise ValidationError(f"{path}: no covariate columns selected")

    features = np.column_stack([parse_numeric(c, allow_missing=True) for c in names])
    target = parse_numeric(target_column, allow_missing=False)
    if not np.isfinite(target).all():
        row = int(np.flatnonzero(~np.isfinite(target))[0])
        raise ValidationError(
            f"{path}: non-finite target in data row {row + 1}"
        )
    batches = None
    if batch_column is not None:
        raw_batches = parse_numeric(batch_column, allow_missing=False)
        batches = raw_batches.astype(np.int64)
    if row_id_column is not None:
        row_ids = parse_numeric(row_id_column, allow_missing=False).astype(np.int64)
    else:
        row_ids = np.arange(len(frame), dtype=np.int64)

    return Dataset(
        features=features,
        target=target,
        feature_names=tuple(names),
        row_ids=row_ids,
        batch_labels=batches,
        target_name=target_column,
    )


def write_csv(
    dataset: Dataset,
    path,
    *,
    batch_column: str = "batch",
    row_id_column: str | None = None,
) -> None:
    """Write features + target (+ batch labels, + row ids) back to CSV.

    Values are written with shortest round-trip float formatting, so loading
    the file again reproduces the same numbers bit for bit. Pass
    ``row_id_column`` to keep the row ids joinable with other exports.
    """
    path = Path(path)
    columns: dict[str, np.ndarray] = {}
    if row_id_column is not None:
        columns[row_id_column] = dataset.row_ids
    columns.update(
        {name: dataset.features[:, j] for j, name in enumerate(dataset.feature_names)}
    )
    columns[dataset.target_name] = dataset.target
    if dataset.batch_labels is not None:
        columns[batch_column] = dataset.batch_labels
    pd.DataFrame(columns).to_csv(path, index=False)


def filter_columns(dataset: Dataset) -> tuple[Dataset, FilterReport]:
    """Drop covariate columns with missing values or no variation.

    A column containing any non-finite value is dropped with reason
    ``"missing values"``; a fully finite but constant column is dropped with
    reason ``"no variation"``. Idempotent.
    """
    dropped: list[tuple[str, str]] = []
    keep: list[int] = []
    for j, name in enumerate(dataset.feature_names):
        column = dataset.features[:, j]
        if not np.isfinite(column).all():
            dropped.append((name, "missing values"))
        elif np.all(column == column[0]):
            dropped.append((name, "no variation"))
        else:
            keep.append(j)
    if not keep:
        raise ValidationError(
            "all covariate columns were dropped; no usable covariates remain"
        )
    report = FilterReport(dropped=tuple(dropped))
    if not dropped:
        return dataset, report
    filtered = Dataset(
        features=dataset.features[:, keep],
        target=dataset.target,
        feature_names=tuple(dataset.feature_names[j] for j in keep),
        row_ids=dataset.row_ids,
        batch_labels=dataset.batch_labels,
        target_name=dataset.target_name,
    )
    return filtered, report


def fit_standardization(dataset: Dataset) -> StandardizationParams:
    """Per-column mean and sample standard deviation (divisor n-1)."""
    if not np.isfinite(dataset.features).all():
        raise ValueError(
            "features contain non-finite values; run filter_columns first"
        )
    means = dataset.features.mean(axis=0)
    if dataset.n < 2:
        raise ValueError("standardization needs at least two rows")
    sds = dataset.features.std(axis=0, ddof=1)
    zero = np.flatnonzero(sds == 0)
    if zero.size:
        names = [dataset.feature_names[j] for j in zero]
        raise ValueError(
            f"zero-variance columns {names}; run filter_columns before fitting"
        )
    return StandardizationParams(means=means, standard_deviations=sds)


def _check_params(dataset: Dataset, params: StandardizationParams) -> None:
    if params.means.shape[0] != dataset.p:
        raise ValueError(
            f"params fitted for p={params.means.shape[0]}, dataset has p={dataset.p}"
        )


def apply_standardization(dataset: Dataset, params: StandardizationParams) -> Dataset:
    """Transform each feature column to (x - mean) / sd; target untouched."""
    _check_params(dataset, params)
    scaled = (dataset.features - params.means) / params.standard_deviations
    return Dataset(
        features=scaled,
        target=dataset.target,
        feature_names=dataset.feature_names,
        row_ids=dataset.row_ids,
        batch_labels=dataset.batch_labels,
        target_name=dataset.target_name,
    )


def invert_standardization(dataset: Dataset, params: StandardizationParams) -> Dataset:
    """Inverse of :func:`apply_standardization`."""
    _check_params(dataset, params)
    raw = dataset.features * params.standard_deviations + params.means
    return Dataset(
        features=raw,
        target=dataset.target,
        feature_names=dataset.feature_names,
        row_ids=dataset.row_ids,
        batch_labels=dataset.batch_labels,
        target_name=dataset.target_name,
    )


def train_test_split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition rows into (train, test), deterministically for a given seed.

    Row-random mode holds out exactly ``round(test_fraction * n)`` rows
    (round half away from zero). Batch-grouped mode keeps each batch intact
    on one side and gets as close to the requested test size as whole
    batches allow. Both sides preserve original row order.
    """
    n = dataset.n
    if n < 2:
        raise ValidationError("cannot split a dataset with fewer than 2 rows")
    target_size = round_half_up(spec.test_fraction * n)
    if target_size < 1 or target_size >= n:
        raise ValidationError(
            f"test_fraction={spec.test_fraction} leaves an empty side for n={n}"
        )
    rng = np.random.default_rng(spec.seed)

    if spec.mode == "row-random":
        permutation = rng.permutation(n)
        test_positions = np.sort(permutation[:target_size])
    else:
        if dataset.batch_labels is None:
            raise ValidationError("batch-grouped split requires batch_labels")
        labels = np.unique(dataset.batch_labels)
        if labels.size < 2:
            raise ValidationError("batch-grouped split needs at least two batches")
        order = rng.permutation(labels.size)
        chosen: list[int] = []
        count = 0
        for idx in order:
            batch = labels[idx]
            size = int(np.sum(dataset.batch_labels == batch))
            # stop before overshooting further than undershooting
            if count >= target_size:
                break
            if count + size - target_size > target_size - count and chosen:
                break
            chosen.append(batch)
            count += size
        mask = np.isin(dataset.batch_labels, chosen)
        if mask.all():
            # degenerate: a single batch swallowed everything; put it back
            raise ValidationError(
                "batch-grouped split could not leave any training rows"
            )
        test_positions = np.flatnonzero(mask)

    mask = np.zeros(n, dtype=bool)
    mask[test_positions] = True
    train = dataset.take(np.flatnonzero(~mask))
    test = dataset.take(np.flatnonzero(mask))
    return train, test
