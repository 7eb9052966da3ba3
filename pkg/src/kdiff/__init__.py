"""Kernel diffusion densities for density-based clustering."""

from .clustering import ClusterResult, dbscan_cluster, dpc_cluster, dpc_state, pr_curve
from .datasets import Dataset, GmmSpec, unequal_mixture, load_builtin, load_dataset, sample_gmm, standardize
from .density import (
    DensityVector,
    build_transition,
    density_fkd,
    density_kd,
    density_lc,
    density_naive,
    stationary_exact,
)
from .errors import ConvergenceError, NumericalError, SingularSystemError, ValidationError
from .kernels import KernelSpec, kernel_matrix
from .metrics import EvalReport, bcubed_scores, evaluate, pairwise_scores
from .neighbors import build_eps_graph, build_knn_graph
from .pipeline import compute_density

__version__ = "0.1.0"
