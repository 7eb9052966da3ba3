"""Euclidean ε-ball and k-nearest-neighbour graphs.

Every graph can be built two ways: ``method="brute"`` scans all pairs and is
the reference, ``method="tree"`` prunes candidates with a KD-tree.  Both
paths compute the final distances with the same routine and apply the same
ordering rules, so their outputs are identical, not merely close.

Conventions
-----------
* ε-ball: closed ball (``dist <= eps``) and the point lists itself.
* kNN: the point never lists itself; ties at the k-th distance go to the
  lower index.  A duplicate of ``i`` is another point and may be listed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .datasets import Dataset
from .errors import ValidationError

__all__ = [
    "NeighborGraph",
    "build_eps_graph",
    "build_knn_graph",
    "pairwise_distance",
    "point_distances",
]

# candidate slack for the tree path; final membership uses exact distances
_REL_SLACK = 1e-9
_ABS_SLACK = 1e-12


def point_distances(x: np.ndarray, i: int, cols: np.ndarray | None = None) -> np.ndarray:
    """Distances from row ``i`` of ``x`` to rows ``cols`` (all rows if None).

    Accumulates squared coordinate differences column by column so the result
    for a pair does not depend on which other pairs are computed alongside.
    """
    other = x if cols is None else x[cols]
    diff = other - x[i]
    acc = diff[:, 0] * diff[:, 0]
    for k in range(1, x.shape[1]):
        acc += diff[:, k] * diff[:, k]
    return np.sqrt(acc)


def pairwise_distance(ds: Dataset, i: int, j: int) -> float:
    n = ds.n
    for idx in (i, j):
        if not -n <= idx < n:
            raise ValidationError(f"index {idx} out of range for {n} points")
    return float(point_distances(ds.points, i % n, np.array([j % n]))[0])


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Per-point neighbour lists in compressed-row form.

    ``indices[indptr[i]:indptr[i+1]]`` are the neighbours of ``i`` and
    ``distances`` holds the matching Euclidean distances.  ε-ball rows are
    sorted by index; kNN rows by (distance, index).
    """

    mode: str
    param: float
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    distances: np.ndarray

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_distances(self, i: int) -> np.ndarray:
        return self.distances[self.indptr[i]:self.indptr[i + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.counts())

    def to_sparse(self, values: np.ndarray | None = None) -> sparse.csr_matrix:
        """CSR matrix on the graph pattern; stores distances unless given ``values``."""
        data = self.distances if values is None else values
        m = sparse.csr_matrix(
            (np.asarray(data, dtype=float), self.indices.copy(), self.indptr.copy()),
            shape=(self.n, self.n),
        )
        m.has_sorted_indices = False
        return m

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.row_ids().tolist(), self.indices.tolist()))


def _assemble(mode, param, rows):
    n = len(rows)
    counts = np.fromiter((r[0].size for r in rows), dtype=np.int64, count=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    if n and indptr[-1]:
        indices = np.concatenate([r[0] for r in rows]).astype(np.int64)
        dists = np.concatenate([r[1] for r in rows])
    else:
        indices, dists = np.empty(0, np.int64), np.empty(0)
    for a in (indptr, indices, dists):
        a.setflags(write=False)
    return NeighborGraph(mode, param, n, indptr, indices, dists)


def _eps_row(x, i, cand, eps):
    cand = np.asarray(cand, dtype=np.int64)
    dist = point_distances(x, i, cand)
    keep = dist <= eps
    cand, dist = cand[keep], dist[keep]
    order = np.argsort(cand, kind="stable")
    return cand[order], dist[order]


def build_eps_graph(ds: Dataset, eps: float, method: str = "tree") -> NeighborGraph:
    """Closed ε-ball neighbourhoods, self included; the result is symmetric."""
    if not eps > 0 or not np.isfinite(eps):
        raise ValidationError(f"eps must be a positive finite number, got {eps!r}")
    x = ds.points
    n = ds.n
    if method == "brute":
        everyone = np.arange(n)
        rows = [_eps_row(x, i, everyone, eps) for i in range(n)]
    elif method == "tree":
        tree = cKDTree(x)
        cands = tree.query_ball_point(x, r=eps * (1 + _REL_SLACK) + _ABS_SLACK, return_sorted=False)
        rows = [_eps_row(x, i, cands[i], eps) for i in range(n)]
    else:
        raise ValidationError(f"unknown neighbour method {method!r}")
    return _assemble("eps", float(eps), rows)


def _knn_row(x, i, cand, k):
    cand = np.asarray(cand, dtype=np.int64)
    cand = cand[cand != i]
    dist = point_distances(x, i, cand)
    order = np.lexsort((cand, dist))[:k]
    return cand[order], dist[order]


def build_knn_graph(ds: Dataset, k: int, method: str = "tree") -> NeighborGraph:
    """Exactly ``k`` nearest other points per row; ties go to the lower index."""
    n = ds.n
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    k = int(k)
    if k >= n:
        raise ValidationError(f"k={k} requires at least {k + 1} points, dataset has {n}")
    x = ds.points
    if method == "brute":
        everyone = np.arange(n)
        rows = [_knn_row(x, i, everyone, k) for i in range(n)]
    elif method == "tree":
        tree = cKDTree(x)
        # k+1 results include the query point itself (or a duplicate of it)
        dk, _ = tree.query(x, k=k + 1)
        radius = dk[:, -1] * (1 + _REL_SLACK) + _ABS_SLACK
        cands = tree.query_ball_point(x, r=radius, return_sorted=False)
        rows = [_knn_row(x, i, cands[i], k) for i in range(n)]
    else:
        raise ValidationError(f"unknown neighbour method {method!r}")
    return _assemble("knn", k, rows)
