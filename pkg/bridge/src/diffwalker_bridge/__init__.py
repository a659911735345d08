"""PyTorch autograd bridge for the diffwalker seeded-diffusion solver.

Exposes the diffusion solve as one custom differentiable operation:
:func:`random_walker_probabilities` consumes a weight tensor (canonical edge
order), seed set, and grid shape and returns the unmarked rows of the
assignment matrix; its backward pass consumes the loss gradient at those rows
and returns the per-edge weight gradient, computed by the native adjoint (or
sampled / sampled+pruned) routine.

No numerical logic lives here: every value is produced by the native core
and the parity tests assert it.  Buffers are handed over zero-copy when the
tensor is already contiguous float64 on the CPU; otherwise one copy is made.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from diffwalker import (
    GradientRequest,
    SeedSet,
    SolverConfig,
    assemble_blocks,
    build_lattice,
    grad_adjoint,
    grad_per_edge,
    make_solver,
    solve_rw,
)

__all__ = [
    "BridgeOptions",
    "RandomWalkerSolve",
    "random_walker_probabilities",
    "unmarked_vertices",
    "scatter_full_assignments",
]


@dataclass(frozen=True)
class BridgeOptions:
    """Backward strategy and solver settings, mirroring the native semantics.

    ``backward_mode`` is ``"adjoint"`` (exact full gradient), ``"sampled"``
    or ``"pruned"`` (n uniformly sampled edges, zeros elsewhere; pruned
    additionally restricts each edge to its dominant label).  Gradients for
    unsampled edges are dense zeros, as autograd expects dense buffers.
    """

    backward_mode: str = "adjoint"
    n_samples: int = 1024
    rng_seed: int = 0
    rescale: bool = False
    solver: SolverConfig | None = None

    def __post_init__(self):
        if self.backward_mode not in ("adjoint", "sampled", "pruned"):
            raise ValueError(f"unknown backward mode {self.backward_mode!r}")


def _as_float64_array(tensor: torch.Tensor) -> np.ndarray:
    # Zero-copy when already contiguous float64 on CPU; one copy otherwise.
    return tensor.detach().cpu().to(torch.float64).contiguous().numpy()


class RandomWalkerSolve(torch.autograd.Function):
    """Seeded diffusion solve as a differentiable node over edge weights."""

    @staticmethod
    def forward(ctx, weights: torch.Tensor, seeds: SeedSet, height: int, width: int,
                options: BridgeOptions | None = None):
        options = options or BridgeOptions()
        graph = build_lattice(height, width)
        weights_np = _as_float64_array(weights)
        blocks = assemble_blocks(graph, weights_np, seeds)
        solver = make_solver(blocks.lap_uu, options.solver)
        assignments, _ = solve_rw(blocks, seeds, solver=solver)

        ctx.blocks = blocks
        ctx.assignments = assignments
        ctx.solver = solver
        ctx.options = options
        z_u = assignments.probabilities[blocks.unmarked]
        return torch.from_numpy(z_u.copy())

    @staticmethod
    def backward(ctx, upstream: torch.Tensor):
        options = ctx.options
        loss_gradient = _as_float64_array(upstream)
        if options.backward_mode == "adjoint":
            grad = grad_adjoint(
                ctx.blocks, ctx.assignments, loss_gradient, solver=ctx.solver
            )
        else:
            request = GradientRequest(
                loss_gradient=loss_gradient,
                n_samples=options.n_samples,
                pruning=options.backward_mode == "pruned",
                rng_seed=options.rng_seed,
                rescale=options.rescale,
            )
            report = grad_per_edge(
                ctx.blocks, ctx.assignments, request, solver=ctx.solver
            )
            grad = report.grad
        return torch.from_numpy(grad), None, None, None, None


def random_walker_probabilities(
    weights: torch.Tensor,
    seeds: SeedSet,
    height: int,
    width: int,
    options: BridgeOptions | None = None,
) -> torch.Tensor:
    """Differentiable map from edge weights to unmarked assignment rows.

    Parameters
    ----------
    weights : torch.Tensor
        Strictly positive, length ``height*(width-1) + (height-1)*width``,
        canonical edge order (horizontal row-major, then vertical).
    seeds : SeedSet
    height, width : int
    options : BridgeOptions, optional

    Returns
    -------
    torch.Tensor
        Shape ``(n_unmarked, n_labels)`` float64; rows follow ascending
        unmarked vertex id (see :func:`unmarked_vertices`).
    """
    return RandomWalkerSolve.apply(weights, seeds, height, width, options)


def unmarked_vertices(seeds: SeedSet, height: int, width: int) -> torch.Tensor:
    """Grid vertex ids (ascending) of the rows returned by the bridge forward."""
    marked = np.zeros(height * width, dtype=bool)
    marked[seeds.vertices] = True
    return torch.from_numpy(np.flatnonzero(~marked))


def scatter_full_assignments(
    z_u: torch.Tensor, seeds: SeedSet, height: int, width: int
) -> torch.Tensor:
    """Place unmarked rows and one-hot seed rows into the full ``(V, L)`` matrix.

    Pure placement (differentiable through ``z_u``); seed rows are constants.
    """
    n = height * width
    full = z_u.new_zeros((n, z_u.shape[1]))
    full[unmarked_vertices(seeds, height, width)] = z_u
    seed_rows = torch.from_numpy(np.asarray(seeds.vertices))
    seed_cols = torch.from_numpy(np.asarray(seeds.labels))
    full[seed_rows, seed_cols] = 1.0
    return full
