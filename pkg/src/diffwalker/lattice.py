"""4-connected lattice graphs and their seeded graph-Laplacian blocks.

Edge ordering is canonical and documented: all horizontal edges first, in
row-major order (``height * (width - 1)`` of them), then all vertical edges,
also row-major (``(height - 1) * width``).  Edge ``k`` for ``k <
height*(width-1)`` joins pixel ``(r, c)`` to ``(r, c+1)`` with ``r = k //
(width-1)``, ``c = k % (width-1)``; the remaining edges join ``(r, c)`` to
``(r+1, c)`` with the offset index split the same way over a ``(height-1,
width)`` grid.  Weight files and gradient vectors use this indexing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._errors import SingularSystemError, ValidationError

__all__ = [
    "LatticeGraph",
    "SeedSet",
    "LaplacianBlocks",
    "build_lattice",
    "full_laplacian",
    "assemble_blocks",
    "edge_count",
]


def edge_count(height: int, width: int) -> int:
    """Number of 4-neighbor edges of a ``height x width`` grid."""
    return height * (width - 1) + (height - 1) * width


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """A 2D pixel grid with 4-connected edges in canonical order."""

    height: int
    width: int
    edges: np.ndarray  # (n_edges, 2) int64, endpoint vertex ids

    @property
    def n_vertices(self) -> int:
        return self.height * self.width

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_horizontal(self) -> int:
        """Count of horizontal edges; they occupy indices ``[0, n_horizontal)``."""
        return self.height * (self.width - 1)

    def vertex_id(self, row, col):
        """Row-major pixel coordinates -> vertex id."""
        return np.asarray(row) * self.width + np.asarray(col)

    def vertex_coords(self, vertex):
        """Vertex id -> (row, col) pixel coordinates."""
        vertex = np.asarray(vertex)
        return vertex // self.width, vertex % self.width


def build_lattice(height: int, width: int) -> LatticeGraph:
    """Build the 4-connected lattice graph of a ``height x width`` image.

    Parameters
    ----------
    height, width : int
        Grid dimensions, both >= 1.

    Returns
    -------
    LatticeGraph
        Graph with edges in the canonical order documented in the module
        docstring.
    """
    height, width = int(height), int(width)
    if height < 1 or width < 1:
        raise ValidationError(f"grid dimensions must be >= 1, got {height}x{width}")
    ids = np.arange(height * width, dtype=np.int64).reshape(height, width)
    horizontal = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    vertical = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    edges = np.concatenate([horizontal, vertical], axis=0)
    return LatticeGraph(height=height, width=width, edges=edges)


@dataclass(frozen=True, eq=False)
class SeedSet:
    """Marked vertices and their labels.

    Vertex ids are unique; labels form the contiguous range ``0 .. n_labels-1``
    and every label occurs at least once.
    """

    vertices: np.ndarray  # (n_seeds,) int64 grid vertex ids
    labels: np.ndarray  # (n_seeds,) int64 label ids
    n_labels: int

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "labels", labels)
        if vertices.ndim != 1 or labels.shape != vertices.shape:
            raise ValidationError("seed vertices and labels must be 1D and equal length")
        if len(vertices) == 0:
            raise ValidationError("a seed set must contain at least one seed")
        if len(np.unique(vertices)) != len(vertices):
            raise ValidationError("seed vertex ids must be unique")
        if vertices.min() < 0:
            raise ValidationError("seed vertex ids must be nonnegative")
        present = np.unique(labels)
        expected = np.arange(self.n_labels)
        if not np.array_equal(present, expected):
            raise ValidationError(
                f"seed labels must cover 0..{self.n_labels - 1} exactly; got {present}"
            )

    @classmethod
    def from_pairs(cls, entries, n_labels: int | None = None) -> "SeedSet":
        """Build from an iterable of ``(vertex_id, label_id)`` pairs."""
        pairs = np.asarray(list(entries), dtype=np.int64).reshape(-1, 2)
        if n_labels is None:
            n_labels = int(pairs[:, 1].max()) + 1 if len(pairs) else 0
        return cls(vertices=pairs[:, 0], labels=pairs[:, 1], n_labels=n_labels)

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True, eq=False)
class LaplacianBlocks:
    """Seed-partitioned blocks of the weighted graph Laplacian.

    ``lap_uu`` is the Laplacian restricted to unmarked vertices: symmetric
    positive definite whenever every connected component holds a seed, with at
    most 5 nonzeros per row on a 4-connected lattice.  ``lap_um`` couples
    unmarked to marked vertices (entries ``-w`` for seed-adjacent pairs); it is
    the transpose of the upper-right Laplacian block.  ``marked`` / ``unmarked``
    list grid vertex ids in ascending order and define the permutation between
    grid ids and block-local row indices.
    """

    lap_uu: sp.csr_matrix  # (n_unmarked, n_unmarked)
    lap_um: sp.csr_matrix  # (n_unmarked, n_marked)
    marked: np.ndarray  # grid ids, ascending
    unmarked: np.ndarray  # grid ids, ascending
    marked_pos: np.ndarray  # (n_vertices,) position among marked, -1 elsewhere
    unmarked_pos: np.ndarray  # (n_vertices,) position among unmarked, -1 elsewhere
    edges: np.ndarray = field(repr=False)  # canonical (n_edges, 2), shared with the graph
    height: int = 0
    width: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.marked) + len(self.unmarked)

    @property
    def n_unmarked(self) -> int:
        return len(self.unmarked)


def _check_weights(graph: LatticeGraph, weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (graph.n_edges,):
        raise ValidationError(
            f"expected {graph.n_edges} edge weights, got shape {weights.shape}"
        )
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0.0):
        raise ValidationError("edge weights must be finite and strictly positive")
    return weights


def full_laplacian(graph: LatticeGraph, weights: np.ndarray) -> sp.csr_matrix:
    """Assemble the full ``|V| x |V|`` weighted graph Laplacian (degree minus adjacency)."""
    weights = _check_weights(graph, weights)
    n = graph.n_vertices
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([-weights, -weights])
    lap = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    degree = np.zeros(n)
    np.add.at(degree, i, weights)
    np.add.at(degree, j, weights)
    diag = sp.coo_matrix((degree, (np.arange(n), np.arange(n))), shape=(n, n))
    return (lap + diag).tocsr()


def _check_seed_coverage(graph: LatticeGraph, seeds: SeedSet) -> None:
    """Every connected component must hold a seed, else lap_uu is singular."""
    n = graph.n_vertices
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    adjacency = sp.coo_matrix(
        (np.ones(len(i)), (i, j)), shape=(n, n)
    )
    n_components, component = connected_components(
        adjacency, directed=False, return_labels=True
    )
    seeded = np.zeros(n_components, dtype=bool)
    seeded[component[seeds.vertices]] = True
    if not seeded.all():
        unreachable = int(np.flatnonzero(~seeded[component])[0])
        raise SingularSystemError(unreachable)


def assemble_blocks(
    graph: LatticeGraph, weights: np.ndarray, seeds: SeedSet
) -> LaplacianBlocks:
    """Partition the weighted Laplacian into seeded (marked) and free blocks.

    Parameters
    ----------
    graph : LatticeGraph
    weights : ndarray
        One strictly positive value per edge, canonical order.
    seeds : SeedSet

    Returns
    -------
    LaplacianBlocks

    Raises
    ------
    SingularSystemError
        If some connected component contains no seed (the restricted
        Laplacian would be singular).
    ValidationError
        On malformed weights or out-of-range seed vertices.

    Notes
    -----
    Edges joining two marked vertices influence neither block nor the
    right-hand side of the diffusion system; their solution derivative is
    exactly zero.  Marked/unmarked id order is ascending, so the blocks do
    not depend on seed insertion order.
    """
    weights = _check_weights(graph, weights)
    if len(seeds.vertices) and seeds.vertices.max() >= graph.n_vertices:
        raise ValidationError(
            f"seed vertex {int(seeds.vertices.max())} out of range for "
            f"{graph.n_vertices} vertices"
        )
    _check_seed_coverage(graph, seeds)

    n = graph.n_vertices
    is_marked = np.zeros(n, dtype=bool)
    is_marked[seeds.vertices] = True
    marked = np.flatnonzero(is_marked).astype(np.int64)
    unmarked = np.flatnonzero(~is_marked).astype(np.int64)

    marked_pos = np.full(n, -1, dtype=np.int64)
    marked_pos[marked] = np.arange(len(marked))
    unmarked_pos = np.full(n, -1, dtype=np.int64)
    unmarked_pos[unmarked] = np.arange(len(unmarked))

    lap = full_laplacian(graph, weights).tocsc()
    lap_u_cols = lap[:, unmarked].tocsr()
    lap_uu = lap_u_cols[unmarked, :].tocsr()
    lap_m_cols = lap[:, marked].tocsr()
    lap_um = lap_m_cols[unmarked, :].tocsr()

    return LaplacianBlocks(
        lap_uu=lap_uu,
        lap_um=lap_um,
        marked=marked,
        unmarked=unmarked,
        marked_pos=marked_pos,
        unmarked_pos=unmarked_pos,
        edges=graph.edges,
        height=graph.height,
        width=graph.width,
    )
