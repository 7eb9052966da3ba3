"""Locally truncated bivariate kernels evaluated on a neighbour graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .datasets import Dataset
from .errors import ValidationError
from .neighbors import NeighborGraph, build_eps_graph, build_knn_graph

__all__ = ["KernelSpec", "SparseKernel", "kernel_matrix", "is_symmetric", "FAMILIES"]

FAMILIES = ("indicator-ball", "symmetric-gaussian", "asymmetric-gaussian")

# keeps row supports equal to the graph pattern when exp() underflows
KERNEL_FLOOR = 1e-300


@dataclass(frozen=True)
class KernelSpec:
    family: str
    eps: float | None = None
    k: int | None = None
    h: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if self.family in ("indicator-ball", "symmetric-gaussian"):
            if self.eps is None or not self.eps > 0:
                raise ValidationError(f"{self.family} kernel needs eps > 0, got {self.eps!r}")
        if self.family == "asymmetric-gaussian":
            if self.k is None or int(self.k) != self.k or self.k < 1:
                raise ValidationError(f"asymmetric-gaussian kernel needs integer k >= 1, got {self.k!r}")
        if self.family != "indicator-ball" and not self.h > 0:
            raise ValidationError(f"bandwidth h must be positive, got {self.h!r}")

    @property
    def graph_mode(self) -> str:
        return "knn" if self.family == "asymmetric-gaussian" else "eps"

    def params(self) -> dict:
        out: dict = {"family": self.family}
        if self.family == "asymmetric-gaussian":
            out["k"] = int(self.k)
        else:
            out["eps"] = float(self.eps)
        if self.family != "indicator-ball":
            out["h"] = float(self.h)
        return out


@dataclass(frozen=True, eq=False)
class SparseKernel:
    """Nonnegative kernel values on the neighbour pattern, row ``i`` = k(x_i, .)."""

    matrix: sparse.csr_matrix
    spec: KernelSpec | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.matrix
        lo, hi = m.indptr[i], m.indptr[i + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    def scaled(self, factor: float) -> "SparseKernel":
        if not factor > 0:
            raise ValidationError("kernel scale factor must be positive")
        m = self.matrix.copy()
        m.data = m.data * factor
        return SparseKernel(m, self.spec)


def build_graph(ds: Dataset, spec: KernelSpec, method: str = "tree") -> NeighborGraph:
    if spec.graph_mode == "knn":
        return build_knn_graph(ds, spec.k, method)
    return build_eps_graph(ds, spec.eps, method)


def kernel_matrix(ds: Dataset, spec: KernelSpec, graph: NeighborGraph | None = None) -> SparseKernel:
    """Evaluate ``spec`` on the pairs of its neighbour graph.

    ``graph`` may be passed to reuse a previously built graph; it must have
    the mode and radius/count the spec asks for.
    """
    if graph is None:
        graph = build_graph(ds, spec)
    else:
        want = spec.k if spec.graph_mode == "knn" else spec.eps
        if graph.mode != spec.graph_mode or graph.param != want or graph.n != ds.n:
            raise ValidationError("supplied neighbour graph does not match the kernel spec")
    if spec.family == "indicator-ball":
        values = np.ones(graph.nnz)
    else:
        values = np.exp(-(graph.distances ** 2) / spec.h)
        np.maximum(values, KERNEL_FLOOR, out=values)
    return SparseKernel(graph.to_sparse(values), spec)


def is_symmetric(kmat: SparseKernel, atol: float = 1e-12) -> bool:
    """True iff every stored (i, j, v) has a stored (j, i, v') with |v - v'| <= atol."""
    m = kmat.matrix.tocsr()
    pattern = m.copy()
    pattern.data = np.ones_like(pattern.data)
    if (pattern != pattern.T).nnz:
        return False
    diff = (m - m.T).tocoo()
    return not np.any(np.abs(diff.data) > atol)
