"""Seeded segmentation by linear diffusion with differentiable edge weights.

A pixel grid becomes a 4-connected edge-weighted graph; diffusing seed
labels to stationarity solves one sparse SPD system per label and yields a
per-pixel probability over labels.  The package differentiates that
solution with respect to every edge weight — exactly (adjoint), or
stochastically by sampling a few edges and optionally pruning to one label
per edge — which makes the diffusivities learnable by gradient descent.
"""

from ._errors import (
    DiffwalkerError,
    SingularSystemError,
    SolverConvergenceError,
    ValidationError,
)
from .diffusion import (
    Assignments,
    SolveReport,
    entropy_map,
    label,
    solve_rw,
    upsample_assignments,
)
from .gradient import (
    DEFAULT_SAMPLE_COUNT,
    GradientReport,
    GradientRequest,
    grad_adjoint,
    grad_per_edge,
    sample_edges,
)
from .lattice import (
    LaplacianBlocks,
    LatticeGraph,
    SeedSet,
    assemble_blocks,
    build_lattice,
    edge_count,
    full_laplacian,
)
from .learning import (
    AdamConfig,
    BackwardConfig,
    EdgeParameters,
    LossConfig,
    TrainResult,
    boundary_edge_labels,
    ce_assignment_loss,
    grady_baseline,
    intensity_weights,
    side_weight_loss,
    total_loss,
    train_per_edge,
)
from .metrics import EvalReport, arand, error_map, evaluate, seeded_watershed, voi
from .seeding import one_hot_labels, oracle_seeds, relabel_contiguous
from .solver import SolverConfig, SpdSolver, make_solver

__version__ = "0.1.0"

__all__ = [
    "DiffwalkerError",
    "SingularSystemError",
    "SolverConvergenceError",
    "ValidationError",
    "Assignments",
    "SolveReport",
    "entropy_map",
    "label",
    "solve_rw",
    "upsample_assignments",
    "DEFAULT_SAMPLE_COUNT",
    "GradientReport",
    "GradientRequest",
    "grad_adjoint",
    "grad_per_edge",
    "sample_edges",
    "LaplacianBlocks",
    "LatticeGraph",
    "SeedSet",
    "assemble_blocks",
    "build_lattice",
    "edge_count",
    "full_laplacian",
    "AdamConfig",
    "BackwardConfig",
    "EdgeParameters",
    "LossConfig",
    "TrainResult",
    "boundary_edge_labels",
    "ce_assignment_loss",
    "grady_baseline",
    "intensity_weights",
    "side_weight_loss",
    "total_loss",
    "train_per_edge",
    "EvalReport",
    "arand",
    "error_map",
    "evaluate",
    "seeded_watershed",
    "voi",
    "one_hot_labels",
    "oracle_seeds",
    "relabel_contiguous",
    "SolverConfig",
    "SpdSolver",
    "make_solver",
    "__version__",
]
