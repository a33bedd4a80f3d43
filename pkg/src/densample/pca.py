"""Principal-component projection for diagnostic views of the covariate space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaModel:
    """Leading principal directions of a centered (optionally scaled) matrix.

    ``explained_variance_ratios`` are shares of the *total* variance, so
    they sum to 1 only when every component is kept. ``fitted_on`` records
    which data the model was fitted to (train/test/...), and the stored
    centering and scaling vectors make projections self-describing.
    """

    components: np.ndarray
    explained_variance_ratios: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    fitted_on: str = "unspecified"
    scaled: bool = True

    @property
    def num_components(self) -> int:
        return self.components.shape[1]


def fit_pca(features, num_components: int, scale: bool = True,
            fitted_on: str = "unspecified") -> PcaModel:
    """Fit PCA by singular value decomposition of the centered matrix.

    ``scale=True`` divides each centered column by its sample standard
    deviation (divisor n-1) first, i.e. correlation-matrix PCA; columns then
    contribute comparably regardless of units. Component signs are fixed by
    making each component's largest-magnitude loading positive.
    """
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n, p = matrix.shape
    if n < 2:
        raise ValueError("PCA needs at least two rows")
    if not 1 <= num_components <= min(n - 1, p):
        raise ValueError(
            f"num_components must be in [1, {min(n - 1, p)}], got {num_components}"
        )
    means = matrix.mean(axis=0)
    centered = matrix - means
    if scale:
        scales = matrix.std(axis=0, ddof=1)
        if np.any(scales == 0):
            raise ValueError("zero-variance column; drop it or disable scaling")
        centered = centered / scales
    else:
        scales = np.ones(p)
        if not np.any(centered):
            raise ValueError("zero-variance input; PCA is undefined")

    _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
    total_variance = (centered * centered).sum() / (n - 1)
    variances = singular_values**2 / (n - 1)
    ratios = variances[:num_components] / total_variance

    components = vt[:num_components].T.copy()
    for j in range(num_components):
        column = components[:, j]
        if column[np.argmax(np.abs(column))] < 0:
            components[:, j] = -column

    return PcaModel(
        components=components,
        explained_variance_ratios=ratios,
        means=means,
        scales=scales,
        fitted_on=fitted_on,
        scaled=scale,
    )


def project(model: PcaModel, features) -> np.ndarray:
    """Project rows onto the model's components after centering/scaling."""
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != model.means.shape[0]:
        raise ValueError(
            f"features must have {model.means.shape[0]} columns, got {matrix.shape}"
        )
    return ((matrix - model.means) / model.scales) @ model.components
