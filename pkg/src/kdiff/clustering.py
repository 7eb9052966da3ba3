"""Density peaks clustering (DPC) and density-thresholded DBSCAN."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist

from .datasets import Dataset
from .density import DensityVector
from .errors import ValidationError
from .metrics import bcubed_scores, pairwise_scores
from .neighbors import NeighborGraph

__all__ = [
    "NO_HIGHER",
    "NOISE",
    "DpcState",
    "ClusterResult",
    "density_order",
    "dpc_state",
    "dpc_cluster",
    "dpc_cluster_threshold",
    "dbscan_cluster",
    "pr_curve",
]

NO_HIGHER = -1
NOISE = -1

# rows of the distance block computed at once in dpc_state
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: np.ndarray
    num_clusters: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        present = np.unique(lab[lab != NOISE])
        if np.any(lab < NOISE):
            raise ValidationError("labels below the noise sentinel")
        if not np.array_equal(present, np.arange(self.num_clusters)):
            raise ValidationError("cluster labels must cover 0..num_clusters-1 exactly")

    @property
    def n(self) -> int:
        return self.labels.size

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "label"])
            w.writerows(enumerate(self.labels.tolist()))

    def to_dict(self) -> dict:
        return {
            "num_clusters": int(self.num_clusters),
            "num_noise": int(np.sum(self.labels == NOISE)),
            "provenance": self.provenance,
            "labels": self.labels.tolist(),
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def density_order(values: np.ndarray) -> np.ndarray:
    """Point indices from highest to lowest density; equal densities by index."""
    values = np.asarray(values)
    return np.lexsort((np.arange(values.size), -values))


@dataclass(frozen=True, eq=False)
class DpcState:
    """Per-point DPC quantities.

    ``delta[i]`` is the distance to ``nn_higher[i]``, the nearest point that
    ranks higher in :func:`density_order`.  The single top-ranked point has
    ``nn_higher == NO_HIGHER`` and ``delta`` equal to the largest pairwise
    distance.  ``gamma = rho * delta``.
    """

    density: DensityVector
    delta: np.ndarray
    nn_higher: np.ndarray
    gamma: np.ndarray
    order: np.ndarray

    @property
    def n(self) -> int:
        return self.delta.size

    @property
    def peak(self) -> int:
        return int(self.order[0])


def dpc_state(density: DensityVector, ds: Dataset) -> DpcState:
    rho = density.values
    n = ds.n
    if rho.size != n:
        raise ValidationError(f"density has {rho.size} values for {n} points")
    x = ds.points
    order = density_order(rho)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    delta = np.empty(n)
    nn = np.full(n, NO_HIGHER, dtype=np.int64)
    diameter = 0.0
    step = max(1, _BLOCK_CELLS // max(n, 1))
    for lo in range(0, n, step):
        rows = np.arange(lo, min(n, lo + step))
        dist = cdist(x[rows], x)
        diameter = max(diameter, float(dist.max()))
        # only strictly higher-ranked points qualify; argmin keeps the lowest index on ties
        dist[rank[None, :] >= rank[rows, None]] = np.inf
        best = np.argmin(dist, axis=1)
        delta[rows] = dist[np.arange(rows.size), best]
        nn[rows] = best
    top = order[0]
    nn[top] = NO_HIGHER
    delta[top] = diameter
    return DpcState(density, delta, nn, rho * delta, order)


def _propagate(state: DpcState, center_ids: np.ndarray) -> np.ndarray:
    labels = np.full(state.n, NOISE, dtype=np.int64)
    labels[center_ids] = np.arange(center_ids.size)
    nn = state.nn_higher
    for i in state.order:
        if labels[i] == NOISE:
            labels[i] = labels[nn[i]]
    return labels


def _provenance(state: DpcState, **extra) -> dict:
    return {
        "algorithm": "dpc",
        "density": state.density.kind,
        "density_params": dict(state.density.params),
        **extra,
    }


def dpc_cluster(state: DpcState, c: int) -> ClusterResult:
    """Top-``c`` points by gamma become centers; the rest follow ``nn_higher``.

    Centers are labelled ``0..c-1`` in decreasing gamma (ties by index).  The
    top-density point is always a center so every chain ends at one; with
    nonnegative densities its gamma is maximal anyway.
    """
    n = state.n
    if int(c) != c or not 1 <= c <= n:
        raise ValidationError(f"number of clusters must be in [1, {n}], got {c!r}")
    c = int(c)
    ranked = np.lexsort((np.arange(n), -state.gamma))
    centers = ranked[:c]
    if state.peak not in centers:
        centers = np.concatenate([[state.peak], centers[: c - 1]])
    return ClusterResult(_propagate(state, centers), c, _provenance(state, c=c))


def dpc_cluster_threshold(state: DpcState, tau: float) -> ClusterResult:
    """Centers are the points with ``gamma >= tau`` (plus the density peak)."""
    n = state.n
    ranked = np.lexsort((np.arange(n), -state.gamma))
    chosen = ranked[state.gamma[ranked] >= tau]
    if state.peak not in chosen:
        chosen = np.concatenate([[state.peak], chosen])
    return ClusterResult(_propagate(state, chosen), chosen.size, _provenance(state, tau=float(tau)))


def dbscan_cluster(density: DensityVector, graph: NeighborGraph, core_threshold: float) -> ClusterResult:
    """DBSCAN with the core test ``density >= core_threshold``.

    Clusters are connected components of cores under the ε-ball graph,
    numbered by their smallest member index.  A non-core point adjacent to a
    core joins its nearest core neighbour (distance ties to the lower index);
    anything else is noise.
    """
    if graph.mode != "eps":
        raise ValidationError("DBSCAN needs an eps-ball graph")
    n = graph.n
    if len(density) != n:
        raise ValidationError(f"density has {len(density)} values, graph has {n} points")
    core = density.values >= core_threshold
    labels = np.full(n, NOISE, dtype=np.int64)
    core_ids = np.flatnonzero(core)
    if core_ids.size:
        adj = graph.to_sparse()[core_ids][:, core_ids]
        ncomp, comp = csgraph.connected_components(adj, directed=False)
        # renumber components by first core index
        first = np.full(ncomp, n, dtype=np.int64)
        np.minimum.at(first, comp, core_ids)
        remap = np.empty(ncomp, dtype=np.int64)
        remap[np.argsort(first, kind="stable")] = np.arange(ncomp)
        labels[core_ids] = remap[comp]
    else:
        ncomp = 0

    for i in np.flatnonzero(~core):
        nbrs = graph.neighbors(i)
        dists = graph.neighbor_distances(i)
        mask = core[nbrs]
        if mask.any():
            cn, cd = nbrs[mask], dists[mask]
            j = cn[np.lexsort((cn, cd))[0]]
            labels[i] = labels[j]
    prov = {
        "algorithm": "dbscan",
        "density": density.kind,
        "density_params": dict(density.params),
        "eps": graph.param,
        "core_threshold": float(core_threshold),
    }
    return ClusterResult(labels, ncomp, prov)


def pr_curve(state: DpcState, truth, c_grid: Sequence[int]) -> list[dict]:
    """Pairwise and BCubed precision/recall of ``dpc_cluster`` for each ``c``."""
    if len(c_grid) == 0:
        raise ValidationError("empty c grid")
    truth = np.asarray(truth)
    rows = []
    for c in c_grid:
        res = dpc_cluster(state, c)
        pp, pr, pf = pairwise_scores(res.labels, truth)
        bp, br, bf = bcubed_scores(res.labels, truth)
        rows.append({
            "c": int(c),
            "pairwise_precision": pp, "pairwise_recall": pr, "pairwise_f": pf,
            "bcubed_precision": bp, "bcubed_recall": br, "bcubed_f": bf,
        })
    return rows
