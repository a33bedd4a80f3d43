"""Exact k-nearest-neighbour search and mean-distance density scores.

Distances are Euclidean. Callers are expected to standardize columns first
when variables carry incommensurate units; nothing here rescales.

Determinism contract: neighbour lists are sorted by distance and ties break
toward the lower row id. The KD-tree is used only to *find candidates*;
final distances are always recomputed with the same NumPy expression the
brute-force path uses, so both paths return identical ids in identical
order. For wide matrices (p > 20) the tree degrades toward a linear scan
and the index falls back to the blocked brute-force path outright.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

_TREE_MAX_DIM = 20
_TREE_MIN_ROWS = 64
# Relative slack when converting a tree-reported radius into a candidate
# search radius: covers rounding differences between the tree's distance
# arithmetic and our own without ever dropping a true neighbour.
_RADIUS_SLACK = 1e-9
_BLOCK_ELEMENTS = 2**24  # cap scratch memory for brute-force blocks


@dataclass(frozen=True)
class DensityScore:
    """One row's mean distance to its k nearest neighbours."""

    row_id: int
    mean_knn_distance: float


def _sq_dists(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from one query to each row of points."""
    diff = points - query
    return (diff * diff).sum(axis=1)


def _sq_dist_block(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Squared distances, queries x points, computed in memory-bounded blocks."""
    n, p = points.shape
    q = queries.shape[0]
    out = np.empty((q, n), dtype=np.float64)
    step = max(1, _BLOCK_ELEMENTS // max(1, n * p))
    for start in range(0, q, step):
        stop = min(q, start + step)
        diff = queries[start:stop, None, :] - points[None, :, :]
        out[start:stop] = (diff * diff).sum(axis=2)
    return out


class NeighborIndex:
    """Exact Euclidean k-NN over a fixed matrix of reference rows.

    Immutable after construction; queries are safe to run concurrently.
    """

    def __init__(self, features, row_ids=None, method: str = "auto"):
        points = np.ascontiguousarray(features, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ValueError("index needs a non-empty 2-D matrix")
        if not np.isfinite(points).all():
            raise ValueError("index matrix contains non-finite values")
        n, p = points.shape
        if row_ids is None:
            row_ids = np.arange(n, dtype=np.int64)
        else:
            row_ids = np.asarray(row_ids, dtype=np.int64)
            if row_ids.shape != (n,):
                raise ValueError("row_ids length does not match matrix rows")
            if np.any(np.diff(row_ids) <= 0):
                raise ValueError("row_ids must be strictly increasing")
        if method == "auto":
            method = "tree" if p <= _TREE_MAX_DIM and n >= _TREE_MIN_ROWS else "brute"
        if method not in ("tree", "brute"):
            raise ValueError(f"unknown index method {method!r}")
        points.flags.writeable = False
        self.points = points
        self.row_ids = row_ids
        self.method = method
        self.metric = "euclidean"
        self._tree = cKDTree(points) if method == "tree" else None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def _check_queries(self, queries: np.ndarray) -> np.ndarray:
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != self.p:
            raise ValueError(
                f"queries must be 2-D with {self.p} columns, got {queries.shape}"
            )
        if not np.isfinite(queries).all():
            raise ValueError("queries contain non-finite values")
        return queries

    def _knn_positions_ball(self, queries, k, exclude):
        """Exact per-query search via ball expansion; handles any tie layout."""
        q = queries.shape[0]
        kq = min(k + 1, self.n)
        tree_dist, _ = self._tree.query(queries, k=kq)
        if tree_dist.ndim == 1:  # scipy squeezes the k=1 case
            tree_dist = tree_dist[:, None]
        radius = tree_dist[:, -1] * (1.0 + _RADIUS_SLACK) + 1e-12
        cand_lists = self._tree.query_ball_point(queries, radius)
        positions = np.empty((q, k), dtype=np.int64)
        sq_out = np.empty((q, k), dtype=np.float64)
        for i in range(q):
            cand = np.sort(np.asarray(cand_lists[i], dtype=np.int64))
            if exclude[i] >= 0:
                cand = cand[cand != exclude[i]]
            sq = _sq_dists(self.points[cand], queries[i])
            order = np.argsort(sq, kind="stable")[:k]
            positions[i] = cand[order]
            sq_out[i] = sq[order]
        return positions, sq_out

    def knn_positions(
        self, queries, k: int, exclude_positions=None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Batch k-NN returning row positions and squared distances.

        Parameters
        ----------
        queries : (q, p) array
        k : int
            Number of neighbours per query; must not exceed the rows
            available after exclusion.
        exclude_positions : (q,) int array, optional
            For each query, one reference row position to skip (-1 for
            none). Used to drop a row's own entry when scoring a dataset
            against itself.

        Returns
        -------
        positions : (q, k) int64
        sq_dists : (q, k) float64, non-decreasing along axis 1
        """
        queries = self._check_queries(queries)
        q = queries.shape[0]
        if k < 1:
            raise ValueError("k must be at least 1")
        if exclude_positions is None:
            exclude = np.full(q, -1, dtype=np.int64)
        else:
            exclude = np.asarray(exclude_positions, dtype=np.int64)
            if exclude.shape != (q,):
                raise ValueError("exclude_positions length does not match queries")
        available = self.n - int((exclude >= 0).any())
        if k > available:
            raise ValueError(f"k={k} exceeds available reference rows ({available})")

        positions = np.empty((q, k), dtype=np.int64)
        sq_out = np.empty((q, k), dtype=np.float64)

        if self._tree is None:
            sq = _sq_dist_block(self.points, queries)
            rows = np.arange(q)
            has_excl = exclude >= 0
            if has_excl.any():
                sq[rows[has_excl], exclude[has_excl]] = np.inf
            # stable sort on distance keeps the lower position first on ties
            order = np.argsort(sq, axis=1, kind="stable")[:, :k]
            positions[:] = order
            sq_out[:] = np.take_along_axis(sq, order, axis=1)
            return positions, sq_out

        # Fast path: let the tree propose k + slack candidates per query,
        # recompute their distances with our own arithmetic, and keep the
        # result wherever the k-th distance sits clear of the candidate
        # horizon (so no outside point can tie into the top k). Rows that
        # fail that margin check get the exact ball expansion instead.
        slack_k = min(k + 1 + 15, self.n)
        tree_dist, tree_idx = self._tree.query(queries, k=slack_k)
        if tree_dist.ndim == 1:
            tree_dist = tree_dist[:, None]
            tree_idx = tree_idx[:, None]
        tree_idx = tree_idx.astype(np.int64)
        sq = np.empty((q, slack_k), dtype=np.float64)
        step = max(1, _BLOCK_ELEMENTS // max(1, slack_k * self.p))
        for start in range(0, q, step):
            stop = min(q, start + step)
            diff = self.points[tree_idx[start:stop]] - queries[start:stop, None, :]
            sq[start:stop] = (diff * diff).sum(axis=2)
        sq[tree_idx == exclude[:, None]] = np.inf
        keyed = np.empty((q, slack_k), dtype=[("d", "f8"), ("i", "i8")])
        keyed["d"] = sq
        keyed["i"] = tree_idx
        order = np.argsort(keyed, axis=1, order=("d", "i"))[:, :k]
        positions[:] = np.take_along_axis(tree_idx, order, axis=1)
        sq_out[:] = np.take_along_axis(sq, order, axis=1)

        if slack_k < self.n:
            # any point outside the candidates has tree distance >= horizon
            horizon = tree_dist[:, -1] * (1.0 - _RADIUS_SLACK) - 1e-12
            unsafe = np.sqrt(sq_out[:, -1]) >= horizon
            if unsafe.any():
                rows = np.flatnonzero(unsafe)
                positions[rows], sq_out[rows] = self._knn_positions_ball(
                    queries[rows], k, exclude[rows]
                )
        return positions, sq_out


def build_index(features, row_ids=None, method: str = "auto") -> NeighborIndex:
    """Build an exact spatial index over the rows of a feature matrix."""
    return NeighborIndex(features, row_ids=row_ids, method=method)


def knn(
    index: NeighborIndex, query, k: int, exclude_id: int | None = None
) -> list[tuple[int, float]]:
    """k nearest indexed rows to one query point.

    Returns min(k, available) ``(row_id, distance)`` pairs sorted by
    distance, ties broken by ascending row id. ``exclude_id`` skips the
    indexed row with that id (use when the query itself is an indexed row).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != index.p:
        raise ValueError(f"query must be a length-{index.p} vector")
    exclude_positions = None
    if exclude_id is not None:
        matches = np.flatnonzero(index.row_ids == exclude_id)
        if matches.size:
            exclude_positions = np.asarray([matches[0]], dtype=np.int64)
    available = index.n - (1 if exclude_positions is not None else 0)
    k_eff = min(k, available)
    if k_eff == 0:
        return []
    if exclude_positions is None:
        exclude_positions = np.asarray([-1], dtype=np.int64)
    positions, sq = index.knn_positions(query[None, :], k_eff, exclude_positions)
    ids = index.row_ids[positions[0]]
    dists = np.sqrt(sq[0])
    return [(int(i), float(d)) for i, d in zip(ids, dists)]


def mean_knn_distances(
    index: NeighborIndex, queries, k: int, exclude_self: bool = False
) -> np.ndarray:
    """Mean distance from each query row to its k nearest indexed rows.

    With ``exclude_self=True`` the queries must be the index's own rows in
    order: query i skips reference row i, so duplicate points still score 0
    only when k other exact duplicates exist. This is the density score used
    for weighting and for picking underrepresented observations: sparse
    regions score high, dense regions low.
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2:
        raise ValueError("queries must be a 2-D matrix")
    q = queries.shape[0]
    available = index.n - (1 if exclude_self else 0)
    if k < 1 or k > available:
        raise ValueError(f"k={k} exceeds available reference rows ({available})")
    if exclude_self:
        if q != index.n:
            raise ValueError(
                "exclude_self requires the queries to be the indexed rows themselves"
            )
        exclude = np.arange(q, dtype=np.int64)
    else:
        exclude = None
    _, sq = index.knn_positions(queries, k, exclude)
    return np.sqrt(sq).mean(axis=1)


def density_score_records(
    index: NeighborIndex, k: int, exclude_self: bool = True
) -> list[DensityScore]:
    """Self-scores of the indexed rows, as exportable records."""
    scores = mean_knn_distances(index, index.points, k, exclude_self=exclude_self)
    return [
        DensityScore(row_id=int(i), mean_knn_distance=float(s))
        for i, s in zip(index.row_ids, scores)
    ]
