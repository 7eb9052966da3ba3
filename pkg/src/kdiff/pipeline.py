"""Named density recipes shared by the CLI and the benchmark harness."""

from __future__ import annotations

import logging
import math

import numpy as np

from .datasets import Dataset
from .density import (
    DensityVector,
    build_transition,
    chain_diagnosis,
    density_fkd,
    density_kd,
    density_lc,
    density_naive,
)
from .errors import ConvergenceError, ValidationError
from .kernels import KernelSpec, kernel_matrix
from .neighbors import build_knn_graph

log = logging.getLogger(__name__)

__all__ = ["DENSITY_KINDS", "REQUIRED_PARAMS", "AUTO_DAMPING", "compute_density", "kernel_spec_for"]

DENSITY_KINDS = ("naive", "lc", "kd-sym", "kd-asym", "fkd-sym", "fkd-asym")

REQUIRED_PARAMS = {
    "naive": ("eps",),
    "lc": ("eps", "k"),
    "kd-sym": ("eps",),
    "kd-asym": ("k",),
    "fkd-sym": ("eps",),
    "fkd-asym": ("k",),
}

AUTO_DAMPING = 1e-3


def kernel_spec_for(kind: str, eps=None, k=None, h=0.5) -> KernelSpec:
    if kind.endswith("-sym"):
        return KernelSpec("symmetric-gaussian", eps=eps, h=h)
    if kind.endswith("-asym"):
        return KernelSpec("asymmetric-gaussian", k=k, h=h)
    raise ValidationError(f"{kind!r} is not a kernel-based density")


def _check_required(kind, given):
    if kind not in DENSITY_KINDS:
        raise ValidationError(f"unknown density kind {kind!r}; choose from {DENSITY_KINDS}")
    missing = [p for p in REQUIRED_PARAMS[kind] if given.get(p) is None]
    if missing:
        raise ValidationError(f"density {kind!r} requires parameter(s): {', '.join(missing)}")


def compute_density(
    ds: Dataset,
    kind: str,
    *,
    eps: float | None = None,
    k: int | None = None,
    h: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10000,
    damping: float | None = None,
) -> DensityVector:
    """Compute one of :data:`DENSITY_KINDS` on ``ds``.

    ``damping=None`` picks 0 for ergodic chains and :data:`AUTO_DAMPING`
    otherwise; in the damped case ``max_iter`` is raised to the step count
    the ``(1 - damping)`` contraction needs to reach ``tol``.
    """
    _check_required(kind, {"eps": eps, "k": k})
    if kind == "naive":
        return density_naive(ds, eps)
    if kind == "lc":
        rho = density_naive(ds, eps)
        return density_lc(rho, build_knn_graph(ds, k))

    spec = kernel_spec_for(kind, eps=eps, k=k, h=h)
    P = build_transition(kernel_matrix(ds, spec))
    if kind.startswith("fkd"):
        return DensityVector(density_fkd(P).values, "fkd", spec.params())

    if damping is None:
        if chain_diagnosis(P) is None:
            try:
                kd = density_kd(P, tol=tol, max_iter=max_iter)
            except ConvergenceError as exc:
                log.info("undamped iteration failed (%s); retrying with damping %g", exc, AUTO_DAMPING)
                damping = AUTO_DAMPING
            else:
                return DensityVector(kd.values, "kd", {**spec.params(), **kd.params})
        else:
            damping = AUTO_DAMPING
    if damping > 0:
        max_iter = max(max_iter, damped_iterations(damping, tol))
    kd = density_kd(P, tol=tol, max_iter=max_iter, damping=damping)
    return DensityVector(kd.values, "kd", {**spec.params(), **kd.params})


def damped_iterations(damping: float, tol: float) -> int:
    """Step budget for the damped iteration: twice what a (1 - damping) contraction needs."""
    return 2 * math.ceil(math.log(tol / 2) / math.log1p(-damping))


def eps_grid(ds: Dataset, num: int = 20, lo_pct: float = 1.0, hi_pct: float = 50.0,
             sample: int = 2000, seed: int = 0) -> np.ndarray:
    """Log-spaced radii between two percentiles of the pairwise distances."""
    from scipy.spatial.distance import pdist

    x = ds.points
    if ds.n > sample:
        idx = np.random.default_rng(seed).choice(ds.n, size=sample, replace=False)
        x = x[idx]
    dist = pdist(x)
    dist = dist[dist > 0]
    if dist.size == 0:
        raise ValidationError("all points coincide; no eps grid possible")
    lo, hi = np.percentile(dist, [lo_pct, hi_pct])
    return np.geomspace(lo, hi, num)


def k_grid(n: int, base=(5, 10, 20, 40, 80)) -> list[int]:
    return sorted({min(k, n - 1) for k in base})
