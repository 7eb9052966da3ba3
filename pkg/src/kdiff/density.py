"""Density functions for density-based clustering.

Five per-point densities are provided:

* ``density_naive``: closed ε-ball counts with the full ``n eps^d V_d``
  normalisation.
* ``density_lc``: local contrast, the fraction of kNN neighbours with a
  strictly lower naive density.
* ``density_kd``: stationary distribution of the random walk obtained by
  row-normalising a kernel matrix, computed by left power iteration.
* ``stationary_exact``: the same stationary distribution from a dense linear
  solve of ``pi^T (I - P + e g^T) = g^T``; used as an oracle.
* ``density_fkd``: column sums of the transition matrix, a linear-time
  surrogate for ``density_kd``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from .datasets import Dataset
from .errors import ConvergenceError, NumericalError, SingularSystemError, ValidationError
from .kernels import SparseKernel
from .neighbors import NeighborGraph, build_eps_graph

log = logging.getLogger(__name__)

__all__ = [
    "DensityVector",
    "TransitionMatrix",
    "unit_ball_volume",
    "density_count",
    "density_naive",
    "density_lc",
    "build_transition",
    "density_kd",
    "stationary_exact",
    "density_fkd",
    "fkd_cluster_mean",
    "chain_diagnosis",
    "write_density_csv",
]

KINDS = ("count", "naive", "lc", "kd", "kd-exact", "fkd", "fkd-normalized")

EXACT_MAX_N = 5000
STALL_WINDOW = 500


@dataclass(frozen=True, eq=False)
class DensityVector:
    values: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown density kind {self.kind!r}")
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def normalized(self) -> np.ndarray:
        return self.values / self.values.sum()


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``P = D^-1 K`` together with the degrees ``d``."""

    matrix: sparse.csr_matrix
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in ``R^d``: ``pi^(d/2) / Gamma(d/2 + 1)``."""
    return math.exp(_log_unit_ball_volume(d))


def _log_gamma_half_integer(z2: int) -> float:
    # log Gamma(z2 / 2) for a positive integer z2, by Gamma(z+1) = z Gamma(z)
    if z2 % 2 == 0:
        acc, z = 0.0, 1.0  # Gamma(1) = 1
    else:
        acc, z = 0.5 * math.log(math.pi), 0.5  # Gamma(1/2) = sqrt(pi)
    while 2 * z < z2:
        acc += math.log(z)
        z += 1.0
    return acc


def _log_unit_ball_volume(d: int) -> float:
    if int(d) != d or d < 1:
        raise ValidationError(f"dimension must be a positive integer, got {d!r}")
    return 0.5 * d * math.log(math.pi) - _log_gamma_half_integer(d + 2)


def _eps_graph_for(ds: Dataset, eps: float, graph: NeighborGraph | None) -> NeighborGraph:
    if graph is None:
        return build_eps_graph(ds, eps)
    if graph.mode != "eps" or graph.param != eps or graph.n != ds.n:
        raise ValidationError("supplied graph is not the eps-ball graph for this eps")
    return graph


def density_count(ds: Dataset, eps: float, graph: NeighborGraph | None = None) -> DensityVector:
    """Raw closed-ball counts ``|B(x, eps) ∩ D|`` (self included)."""
    g = _eps_graph_for(ds, eps, graph)
    return DensityVector(g.counts().astype(float), "count", {"eps": float(eps)})


def density_naive(ds: Dataset, eps: float, graph: NeighborGraph | None = None) -> DensityVector:
    if not eps > 0:
        raise ValidationError(f"eps must be positive, got {eps!r}")
    counts = _eps_graph_for(ds, eps, graph).counts().astype(float)
    # log-space constant; eps^d and V_d under/overflow separately for large d
    log_c = math.log(ds.n) + ds.d * math.log(eps) + _log_unit_ball_volume(ds.d)
    return DensityVector(counts * math.exp(-log_c), "naive", {"eps": float(eps)})


def density_lc(rho: DensityVector, knn: NeighborGraph) -> DensityVector:
    """Local contrast of a naive density over a kNN graph, scaled by ``1/n``."""
    if knn.mode != "knn":
        raise ValidationError("local contrast needs a kNN graph")
    if len(rho) != knn.n:
        raise ValidationError(f"density has {len(rho)} entries, graph has {knn.n} points")
    v = rho.values
    lower = v[knn.row_ids()] > v[knn.indices]
    counts = np.bincount(knn.row_ids()[lower], minlength=knn.n)
    params = dict(rho.params, k=int(knn.param))
    return DensityVector(counts / knn.n, "lc", params)


def build_transition(kmat: SparseKernel) -> TransitionMatrix:
    m = kmat.matrix.tocsr().astype(float)
    if m.nnz and m.data.min() < 0:
        raise ValidationError("kernel values must be nonnegative")
    degrees = np.asarray(m.sum(axis=1)).ravel()
    empty = np.flatnonzero(~(degrees > 0))
    if empty.size:
        raise NumericalError(
            f"{empty.size} point(s) have zero degree (first: {empty[0]}); "
            "widen eps or raise k so every point has a neighbour"
        )
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    p = sparse.csr_matrix((m.data / degrees[rows], m.indices, m.indptr), shape=m.shape)
    degrees.setflags(write=False)
    return TransitionMatrix(p, degrees)


def chain_diagnosis(P: TransitionMatrix) -> str | None:
    """Describe why the chain is not ergodic, or return None if it is.

    Irreducibility is strong connectivity of the transition digraph; the
    period of an irreducible chain is the gcd of ``level(u) + 1 - level(v)``
    over edges ``u -> v``, with BFS levels from any root.
    """
    m = P.matrix
    n = m.shape[0]
    if n == 1:
        return None
    ncomp, comp = csgraph.connected_components(m, directed=True, connection="strong")
    if ncomp > 1:
        # closed classes: components with no edge leaving them
        rows = np.repeat(np.arange(n), np.diff(m.indptr))
        leaving = comp[rows] != comp[m.indices]
        open_classes = np.unique(comp[rows[leaving]])
        closed = ncomp - open_classes.size
        return f"reducible chain: {ncomp} communicating classes, {closed} closed"
    if np.any(m.diagonal() > 0):
        return None
    levels = csgraph.shortest_path(m, method="D", unweighted=True, indices=0)
    rows = np.repeat(np.arange(n), np.diff(m.indptr))
    gaps = (levels[rows] + 1 - levels[m.indices]).astype(np.int64)
    period = int(np.gcd.reduce(np.abs(gaps)))
    if period > 1:
        return f"periodic chain with period {period}"
    return None


def density_kd(
    P: TransitionMatrix,
    tol: float = 1e-10,
    max_iter: int = 10000,
    damping: float = 0.0,
    start: np.ndarray | None = None,
) -> DensityVector:
    """Stationary distribution of ``P`` by left power iteration.

    With ``damping = b > 0`` the iteration runs on ``(1 - b) P + b/n e e^T``
    without forming it.  With ``damping = 0`` a chain that is not ergodic is
    rejected up front, since its limit either does not exist or depends on
    the start vector.

    Raises
    ------
    ConvergenceError
        Non-ergodic chain, stalled iteration, or ``max_iter`` exhausted.
    """
    if not 0.0 <= damping < 1.0:
        raise ValidationError(f"damping must lie in [0, 1), got {damping!r}")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    n = P.n
    if damping == 0.0:
        issue = chain_diagnosis(P)
        if issue:
            raise ConvergenceError(f"{issue}; retry with damping > 0")
    pt = P.matrix.T.tocsr()
    pi = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    keep = 1.0 - damping
    jump = damping / n
    best = np.inf
    since_best = 0
    for it in range(1, max_iter + 1):
        nxt = pt @ pi
        if damping:
            nxt = keep * nxt + jump
        nxt /= nxt.sum()
        change = np.abs(nxt - pi).sum()
        pi = nxt
        if change <= tol:
            log.debug("power iteration converged in %d steps (change %.3g)", it, change)
            params = {"tol": tol, "max_iter": max_iter, "damping": damping, "iterations": it}
            return DensityVector(pi, "kd", params)
        if change < best:
            best, since_best = change, 0
        else:
            since_best += 1
            if since_best >= STALL_WINDOW:
                raise ConvergenceError(
                    f"power iteration stalled at L1 change {change:.3g} after {it} steps "
                    "(chain likely reducible or periodic); retry with damping > 0"
                )
    raise ConvergenceError(
        f"power iteration did not reach tol={tol:g} in {max_iter} steps "
        f"(last change {change:.3g}); raise max_iter or damping"
    )


def stationary_exact(P: TransitionMatrix, max_n: int = EXACT_MAX_N) -> DensityVector:
    """Dense solve of ``pi^T (I - P + e g^T) = g^T`` with ``g`` the column sums."""
    n = P.n
    if n > max_n:
        raise ValidationError(f"exact stationary solve limited to n <= {max_n}, got {n}")
    p = P.matrix.toarray()
    g = p.sum(axis=0)
    a = np.eye(n) - p + np.outer(np.ones(n), g)
    with warnings.catch_warnings():
        # singularity is reported below from the pivots
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(a.T, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if not pivots.min() > 1e-12 * pivots.max():
        raise SingularSystemError("I - P + e g^T is singular: the chain is reducible")
    pi = linalg.lu_solve((lu, piv), g)
    pi /= pi.sum()
    return DensityVector(pi, "kd-exact", {"method": "dense-lu"})


def density_fkd(P: TransitionMatrix) -> DensityVector:
    """Column sums of ``P`` in one pass over the stored entries."""
    m = P.matrix
    values = np.bincount(m.indices, weights=m.data, minlength=m.shape[1])
    return DensityVector(values, "fkd")


def fkd_cluster_mean(fkd: DensityVector, labels) -> dict[int, float]:
    labels = np.asarray(labels)
    if labels.shape != (len(fkd),):
        raise ValidationError(f"{labels.size} labels for {len(fkd)} density values")
    ids, inverse = np.unique(labels, return_inverse=True)
    sums = np.bincount(inverse, weights=fkd.values)
    sizes = np.bincount(inverse)
    return {int(i): float(s / c) for i, s, c in zip(ids, sums, sizes)}


def write_density_csv(path: str | Path, dv: DensityVector) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value", "kind"])
        for i, v in enumerate(dv.values):
            w.writerow([i, repr(float(v)), dv.kind])
