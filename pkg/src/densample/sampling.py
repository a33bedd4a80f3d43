"""Covariate-space sampling strategies for rebalancing training data.

Three strategies build a smaller, more balanced training set:

``1point``
    Draw points uniformly inside the hyper-rectangle spanned by the
    covariates and snap each to its single nearest training row. Because
    most of the rectangle is far from the dense core, the snapped rows
    concentrate on the edge of the data. Combined 50/50 with a plain
    uniform subsample, yielding 2 x 10% of the training rows by default.

``mean``
    Same rectangle draws, but each point becomes a synthetic row: the
    componentwise mean of its 5 nearest training rows, target averaged the
    same way. Also combined 50/50 with a uniform subsample.

``density``
    Weighted resampling (with replacement) of the training rows, with
    probabilities proportional to each row's mean distance to its 100
    nearest neighbours, i.e. inversely proportional to local data density.
    10% of the training rows by default.

A ``random`` baseline (plain 20% uniform subsample, no rebalancing) is
included as a control for experiments; it is not one of the rebalancing
strategies.

Nearest-neighbour lookups run in whatever representation the supplied
index was built on (standardized covariates in the standard pipeline);
emitted rows always carry the original, unscaled covariates so downstream
models train on the same representation as an all-data baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset
from .errors import ValidationError
from .neighbors import NeighborIndex, mean_knn_distances
from .util import round_half_up

STRATEGY_ONEPOINT = "1point"
STRATEGY_MEAN = "mean"
STRATEGY_DENSITY = "density"
STRATEGY_RANDOM = "random"
STRATEGIES = (
    STRATEGY_ONEPOINT,
    STRATEGY_MEAN,
    STRATEGY_DENSITY,
    STRATEGY_RANDOM,
)

PROVENANCE_EDGE_1NN = "edge-1nn"
PROVENANCE_EDGE_MEAN = "edge-mean"
PROVENANCE_RANDOM = "random"
PROVENANCE_DENSITY = "density"


@dataclass(frozen=True)
class HyperRectangle:
    """Axis-aligned box spanned by per-column minima and maxima."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValidationError("lower and upper must be 1-D and equal length")
        if np.any(lower > upper):
            raise ValidationError("lower bound exceeds upper bound")

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return np.all((points >= self.lower) & (points <= self.upper), axis=-1)


@dataclass(frozen=True)
class SamplingPlan:
    """Strategy selector plus every parameter that determines a sample.

    Fractions are shares of the *training* row count: ``edge_fraction``
    rectangle draws and ``random_fraction`` uniform rows for the 1point and
    mean strategies (so their output is 20% of training by default), and
    ``density_fraction`` weighted draws for the density strategy.
    """

    strategy: str
    edge_fraction: float = 0.10
    random_fraction: float = 0.10
    density_fraction: float = 0.10
    k_mean: int = 5
    k_density: int = 100
    seed: int = 0
    random_with_replacement: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        for name in ("edge_fraction", "random_fraction", "density_fraction"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValidationError(f"{name} must be in (0, 1], got {value}")
        if self.k_mean < 1 or self.k_density < 1:
            raise ValidationError("k_mean and k_density must be at least 1")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    def with_seed(self, seed: int) -> "SamplingPlan":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class SampledDataset:
    """A sampled training set plus per-row provenance.

    ``dataset`` carries fresh sequential row ids; ``sources`` maps each new
    row back to the original training row ids it came from (one id, or
    ``k_mean`` ids for synthesized mean rows).
    """

    dataset: Dataset
    provenance: tuple[str, ...]
    sources: tuple[tuple[int, ...], ...]
    plan: SamplingPlan

    def __post_init__(self):
        m = self.dataset.n
        if len(self.provenance) != m or len(self.sources) != m:
            raise ValidationError("provenance and sources must have one entry per row")
        for tag, ids in zip(self.provenance, self.sources):
            expected = self.plan.k_mean if tag == PROVENANCE_EDGE_MEAN else 1
            if len(ids) != expected:
                raise ValidationError(
                    f"row with provenance {tag!r} has {len(ids)} source ids, "
                    f"expected {expected}"
                )


def hyper_rectangle(features) -> HyperRectangle:
    """Componentwise min and max of the rows of a feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValidationError("hyper_rectangle needs a non-empty 2-D matrix")
    return HyperRectangle(lower=features.min(axis=0), upper=features.max(axis=0))


def sample_uniform_z(
    rect: HyperRectangle, count: int, rng: np.random.Generator
) -> np.ndarray:
    """count points, each coordinate independently uniform on its side."""
    if count < 1:
        raise ValidationError("count must be at least 1")
    width = rect.upper - rect.lower
    return rect.lower + width * rng.random((count, rect.lower.shape[0]))


def sample_random_equal_weight(
    train: Dataset,
    count: int,
    rng: np.random.Generator,
    with_replacement: bool = False,
) -> np.ndarray:
    """Positions of a uniform equal-weight random selection of training rows.

    Without replacement by default; ``count`` may not exceed n in that mode.
    """
    if count < 1:
        raise ValidationError("count must be at least 1")
    if not with_replacement and count > train.n:
        raise ValidationError(
            f"cannot draw {count} of {train.n} rows without replacement"
        )
    if with_replacement:
        return rng.integers(0, train.n, size=count, dtype=np.int64)
    return rng.permutation(train.n)[:count].astype(np.int64)


def density_weights(scores) -> np.ndarray:
    """Scale non-negative density scores to probabilities summing to 1."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not np.isfinite(scores).all() or (scores < 0).any():
        raise ValueError("scores must be finite and non-negative")
    total = scores.sum()
    if total <= 0:
        raise ValueError(
            "all density scores are zero (all rows identical); no density contrast"
        )
    return scores / total


def weighted_positions_with_replacement(
    weights: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw positions with replacement by inverting the cumulative weights."""
    cumulative = np.cumsum(weights)
    draws = rng.random(count)
    positions = np.searchsorted(cumulative, draws, side="right")
    # guard the u ~ 1 edge when cumulative[-1] rounds just below 1
    return np.minimum(positions, weights.shape[0] - 1).astype(np.int64)


def _check_index(train: Dataset, index: NeighborIndex) -> None:
    if index.n != train.n:
        raise ValidationError(
            f"index holds {index.n} rows but the training set has {train.n}"
        )


def _assemble(
    train: Dataset,
    rows: np.ndarray,
    targets: np.ndarray,
    provenance: list[str],
    sources: list[tuple[int, ...]],
    plan: SamplingPlan,
) -> SampledDataset:
    sampled = Dataset(
        features=rows,
        target=targets,
        feature_names=train.feature_names,
        row_ids=np.arange(rows.shape[0], dtype=np.int64),
        batch_labels=None,
        target_name=train.target_name,
    )
    return SampledDataset(
        dataset=sampled,
        provenance=tuple(provenance),
        sources=tuple(sources),
        plan=plan,
    )


def _edge_and_random_sizes(train: Dataset, plan: SamplingPlan) -> tuple[int, int]:
    m_edge = round_half_up(plan.edge_fraction * train.n)
    m_random = round_half_up(plan.random_fraction * train.n)
    if m_edge + m_random < 1:
        raise ValidationError(
            f"fractions yield an empty sample for n={train.n}; increase them"
        )
    return m_edge, m_random


def _random_part(
    train: Dataset, count: int, rng: np.random.Generator, plan: SamplingPlan
):
    positions = sample_random_equal_weight(
        train, count, rng, with_replacement=plan.random_with_replacement
    )
    rows = train.features[positions]
    targets = train.target[positions]
    tags = [PROVENANCE_RANDOM] * count
    sources = [(int(train.row_ids[pos]),) for pos in positions]
    return rows, targets, tags, sources


def sample_1point(
    train: Dataset, index: NeighborIndex, plan: SamplingPlan
) -> SampledDataset:
    """Edge-snapping strategy: rectangle draws mapped to their 1-NN rows.

    Emits ``round(edge_fraction * n)`` snapped rows followed by
    ``round(random_fraction * n)`` equal-weight rows. Snapped rows copy the
    source row verbatim (covariates and target); duplicates are kept, acting
    as implicit weights.
    """
    if plan.strategy != STRATEGY_ONEPOINT:
        raise ValidationError(f"plan strategy is {plan.strategy!r}, expected '1point'")
    _check_index(train, index)
    m_edge, m_random = _edge_and_random_sizes(train, plan)
    rng = np.random.default_rng(plan.seed)

    rect = hyper_rectangle(index.points)
    z = sample_uniform_z(rect, m_edge, rng)
    positions, _ = index.knn_positions(z, 1)
    positions = positions[:, 0]
    rows = train.features[positions]
    targets = train.target[positions]
    tags = [PROVENANCE_EDGE_1NN] * m_edge
    sources = [(int(train.row_ids[pos]),) for pos in positions]

    r_rows, r_targets, r_tags, r_sources = _random_part(train, m_random, rng, plan)
    return _assemble(
        train,
        np.vstack([rows, r_rows]),
        np.concatenate([targets, r_targets]),
        tags + r_tags,
        sources + r_sources,
        plan,
    )


def sample_mean(
    train: Dataset, index: NeighborIndex, plan: SamplingPlan
) -> SampledDataset:
    """Neighbourhood-mean strategy: rectangle draws become synthetic rows.

    Each draw is replaced by the componentwise mean of its ``k_mean``
    nearest training rows' original covariates, with the target averaged
    over the same rows. The equal-weight random part is appended as in the
    1point strategy.
    """
    if plan.strategy != STRATEGY_MEAN:
        raise ValidationError(f"plan strategy is {plan.strategy!r}, expected 'mean'")
    _check_index(train, index)
    if train.n < plan.k_mean:
        raise ValidationError(
            f"mean strategy needs at least k_mean={plan.k_mean} rows, have {train.n}"
        )
    m_edge, m_random = _edge_and_random_sizes(train, plan)
    rng = np.random.default_rng(plan.seed)

    rect = hyper_rectangle(index.points)
    z = sample_uniform_z(rect, m_edge, rng)
    positions, _ = index.knn_positions(z, plan.k_mean)
    rows = train.features[positions].mean(axis=1)
    targets = train.target[positions].mean(axis=1)
    tags = [PROVENANCE_EDGE_MEAN] * m_edge
    sources = [tuple(int(i) for i in train.row_ids[pos]) for pos in positions]

    r_rows, r_targets, r_tags, r_sources = _random_part(train, m_random, rng, plan)
    return _assemble(
        train,
        np.vstack([rows, r_rows]),
        np.concatenate([targets, r_targets]),
        tags + r_tags,
        sources + r_sources,
        plan,
    )


def sample_density(
    train: Dataset, index: NeighborIndex, plan: SamplingPlan
) -> SampledDataset:
    """Density-weighted strategy: resample rows inversely to local density.

    Weights are each row's mean distance to its ``k_density`` nearest
    neighbours (self excluded), scaled to sum to 1; ``round(density_fraction
    * n)`` rows are then drawn with replacement, so sparse-region rows are
    overrepresented and repeats are expected.
    """
    if plan.strategy != STRATEGY_DENSITY:
        raise ValidationError(f"plan strategy is {plan.strategy!r}, expected 'density'")
    _check_index(train, index)
    if train.n <= plan.k_density:
        raise ValidationError(
            f"density strategy needs more than k_density={plan.k_density} rows, "
            f"have {train.n}"
        )
    m = round_half_up(plan.density_fraction * train.n)
    if m < 1:
        raise ValidationError(f"density_fraction yields an empty sample for n={train.n}")
    rng = np.random.default_rng(plan.seed)

    scores = mean_knn_distances(index, index.points, plan.k_density, exclude_self=True)
    weights = density_weights(scores)
    positions = weighted_positions_with_replacement(weights, m, rng)
    rows = train.features[positions]
    targets = train.target[positions]
    tags = [PROVENANCE_DENSITY] * m
    sources = [(int(train.row_ids[pos]),) for pos in positions]
    return _assemble(train, rows, targets, tags, sources, plan)


def sample_random_baseline(train: Dataset, plan: SamplingPlan) -> SampledDataset:
    """Control strategy: a plain uniform subsample of the combined size.

    Matches the 1point/mean output size (edge + random fractions) but with
    no rebalancing at all, isolating the effect of simply training on less
    data.
    """
    if plan.strategy != STRATEGY_RANDOM:
        raise ValidationError(f"plan strategy is {plan.strategy!r}, expected 'random'")
    m_edge, m_random = _edge_and_random_sizes(train, plan)
    rng = np.random.default_rng(plan.seed)
    rows, targets, tags, sources = _random_part(train, m_edge + m_random, rng, plan)
    return _assemble(train, rows, targets, tags, sources, plan)


def draw_sample(
    train: Dataset, plan: SamplingPlan, index: NeighborIndex | None = None
) -> SampledDataset:
    """Dispatch to the strategy named by the plan.

    All strategies except ``random`` need a neighbour index built over the
    training covariates (standardized, in the standard pipeline).
    """
    if plan.strategy == STRATEGY_RANDOM:
        return sample_random_baseline(train, plan)
    if index is None:
        raise ValidationError(f"strategy {plan.strategy!r} requires a neighbour index")
    if plan.strategy == STRATEGY_ONEPOINT:
        return sample_1point(train, index, plan)
    if plan.strategy == STRATEGY_MEAN:
        return sample_mean(train, index, plan)
    return sample_density(train, index, plan)
