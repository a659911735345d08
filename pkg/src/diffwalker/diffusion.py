"""Linear diffusion from seeds: assignment probabilities and derived maps.

Solving the seeded Laplace system gives, per pixel, a probability
distribution over seed labels (the assignment matrix).  Hard labels come
from winner-take-all selection, pixelwise uncertainty from the Shannon
entropy of each row, and half-resolution assignments can be scaled up by
bilinear interpolation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from ._errors import SolverConvergenceError, ValidationError
from .lattice import LaplacianBlocks, SeedSet
from .solver import SolverConfig, SpdSolver, make_solver

__all__ = [
    "Assignments",
    "SolveReport",
    "marked_one_hot",
    "solve_rw",
    "label",
    "entropy_map",
    "upsample_assignments",
]


@dataclass(frozen=True, eq=False)
class Assignments:
    """Row-stochastic per-vertex label probabilities.

    ``probabilities`` has shape ``(height * width, n_labels)``, row-major by
    grid vertex id.  Rows of marked vertices are exactly one-hot; unmarked
    rows sum to 1 within solver tolerance and obey the discrete maximum
    principle up to the same tolerance.
    """

    probabilities: np.ndarray
    height: int
    width: int

    @property
    def n_labels(self) -> int:
        return self.probabilities.shape[1]

    def grid(self) -> np.ndarray:
        """View shaped ``(height, width, n_labels)``."""
        return self.probabilities.reshape(self.height, self.width, self.n_labels)


@dataclass
class SolveReport:
    """Solver health data for one diffusion solve.

    ``wall_time`` is informational only and excluded from serialized reports
    so that replayed runs stay byte-identical.
    """

    method: str
    residual_norms: np.ndarray  # one relative residual per label column
    iterations: list[int] | None  # CG iteration counts, None for direct solves
    n_unknowns: int
    n_labels: int
    tolerance: float
    wall_time: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "residual_norms": [float(r) for r in self.residual_norms],
            "iterations": self.iterations,
            "n_unknowns": self.n_unknowns,
            "n_labels": self.n_labels,
            "tolerance": self.tolerance,
        }


def marked_one_hot(blocks: LaplacianBlocks, seeds: SeedSet) -> np.ndarray:
    """One-hot label matrix over the marked vertices, in block-local order."""
    z_m = np.zeros((len(blocks.marked), seeds.n_labels))
    rows = blocks.marked_pos[seeds.vertices]
    z_m[rows, seeds.labels] = 1.0
    return z_m


def solve_rw(
    blocks: LaplacianBlocks,
    seeds: SeedSet,
    config: SolverConfig | None = None,
    solver: SpdSolver | None = None,
) -> tuple[Assignments, SolveReport]:
    """Solve the seeded diffusion system and assemble the assignment matrix.

    The unmarked block satisfies ``lap_uu @ Z_u = -lap_um @ Z_m`` with one
    column per label; marked rows are filled exactly one-hot from the seeds.
    All label columns share a single factorization (or preconditioner).

    Parameters
    ----------
    blocks : LaplacianBlocks
        Output of :func:`diffwalker.lattice.assemble_blocks`.
    seeds : SeedSet
    config : SolverConfig, optional
    solver : SpdSolver, optional
        Prebuilt factorization of ``blocks.lap_uu`` to reuse.

    Returns
    -------
    (Assignments, SolveReport)

    Raises
    ------
    SolverConvergenceError
        If the iterative solve stalls, or a post-solve row-sum check fails.
    """
    height, width = blocks.height, blocks.width
    if solver is None:
        solver = make_solver(blocks.lap_uu, config)
    z_m = marked_one_hot(blocks, seeds)
    rhs = -(blocks.lap_um @ z_m)

    t0 = time.perf_counter()
    z_u = solver.solve(rhs)
    wall = time.perf_counter() - t0

    probabilities = np.zeros((blocks.n_vertices, seeds.n_labels))
    probabilities[blocks.marked] = z_m
    probabilities[blocks.unmarked] = z_u

    tol = (
        solver.config.residual_tol
        if solver.method == "direct"
        else solver.config.cg_rtol
    )
    report = SolveReport(
        method=solver.method,
        residual_norms=solver.residual_norms(rhs, z_u),
        iterations=list(solver.last_iterations) if solver.method == "cg" else None,
        n_unknowns=blocks.n_unmarked,
        n_labels=seeds.n_labels,
        tolerance=tol,
        wall_time=wall,
    )

    # Row sums double as a solver-health check; the last column is solved,
    # not derived, precisely so this assertion has teeth.
    row_tol = 1e-8 if solver.method == "direct" else 10.0 * solver.config.cg_rtol
    row_err = np.abs(probabilities.sum(axis=1) - 1.0).max()
    if row_err > row_tol:
        raise SolverConvergenceError(
            f"assignment rows deviate from stochasticity by {row_err:.3e} "
            f"(allowed {row_tol:.1e})",
            residuals=report.residual_norms,
        )
    return Assignments(probabilities=probabilities, height=height, width=width), report


def label(assignments: Assignments) -> np.ndarray:
    """Winner-take-all labeling, shape ``(height, width)``.

    Ties go to the lowest label id.
    """
    flat = np.argmax(assignments.probabilities, axis=1)
    return flat.reshape(assignments.height, assignments.width)


def entropy_map(assignments: Assignments) -> np.ndarray:
    """Per-pixel Shannon entropy (natural log) of the label distribution.

    ``0 * log 0`` counts as 0, so exact one-hot rows (seeds) map to 0 and a
    uniform row over L labels maps to ``ln L``.
    """
    p = np.clip(assignments.probabilities, 0.0, 1.0)
    h = -xlogy(p, p).sum(axis=1)
    return h.reshape(assignments.height, assignments.width)


def upsample_assignments(assignments: Assignments, target: tuple[int, int]) -> Assignments:
    """Scale assignments to double resolution by bilinear interpolation.

    Each label channel is interpolated with half-pixel-center alignment
    (output pixel ``i`` samples input coordinate ``(i + 0.5) / 2 - 0.5``,
    clamped at the borders), then rows are renormalized to sum to 1 —
    interpolation already preserves row sums exactly, so this only mops up
    floating-point drift.
    """
    th, tw = target
    if th != 2 * assignments.height or tw != 2 * assignments.width:
        raise ValidationError(
            f"target {target} is not the 2x upsampling of "
            f"{(assignments.height, assignments.width)}"
        )
    grid = assignments.grid()

    def axis_coords(size_out, size_in):
        x = (np.arange(size_out) + 0.5) / 2.0 - 0.5
        x = np.clip(x, 0.0, size_in - 1.0)
        lo = np.floor(x).astype(np.int64)
        hi = np.minimum(lo + 1, size_in - 1)
        return lo, hi, x - lo

    r0, r1, fr = axis_coords(th, assignments.height)
    c0, c1, fc = axis_coords(tw, assignments.width)
    fr = fr[:, None, None]
    fc = fc[None, :, None]
    top = grid[r0][:, c0] * (1 - fc) + grid[r0][:, c1] * fc
    bottom = grid[r1][:, c0] * (1 - fc) + grid[r1][:, c1] * fc
    out = top * (1 - fr) + bottom * fr

    out /= out.sum(axis=2, keepdims=True)
    return Assignments(probabilities=out.reshape(th * tw, -1), height=th, width=tw)
