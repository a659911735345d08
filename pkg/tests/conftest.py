"""Shared fixtures and independent (loop-based) oracles for the test suite."""

import numpy as np
import pytest

from diffwalker import SeedSet, build_lattice


def make_instance(rng, height, width, n_labels):
    """Random lattice instance: graph, log-uniform weights, coverage-valid seeds."""
    graph = build_lattice(height, width)
    n_labels = min(n_labels, graph.n_vertices)
    weights = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=graph.n_edges))
    n_seeds = int(rng.integers(n_labels, max(n_labels + 1, graph.n_vertices // 2 + 1)))
    vertices = rng.choice(graph.n_vertices, size=n_seeds, replace=False)
    labels = np.concatenate(
        [np.arange(n_labels), rng.integers(0, n_labels, size=n_seeds - n_labels)]
    )
    seeds = SeedSet(vertices=vertices, labels=labels, n_labels=n_labels)
    return graph, weights, seeds


def dense_laplacian(graph, weights):
    """Independent dense assembly of the weighted graph Laplacian (loops)."""
    n = graph.n_vertices
    lap = np.zeros((n, n))
    for (i, j), w in zip(graph.edges, weights):
        lap[i, i] += w
        lap[j, j] += w
        lap[i, j] -= w
        lap[j, i] -= w
    return lap


def dense_assignments(graph, weights, seeds):
    """Independent dense solve of the seeded diffusion system."""
    lap = dense_laplacian(graph, weights)
    n = graph.n_vertices
    marked = np.zeros(n, dtype=bool)
    marked[seeds.vertices] = True
    u = np.flatnonzero(~marked)
    m = np.flatnonzero(marked)
    z = np.zeros((n, seeds.n_labels))
    for v, lab in zip(seeds.vertices, seeds.labels):
        z[v, lab] = 1.0
    if len(u):
        rhs = -lap[np.ix_(u, m)] @ z[m]
        z[u] = np.linalg.solve(lap[np.ix_(u, u)], rhs)
    return z


def fd_gradient(graph, weights, seeds, loss_grad_unmarked, h_rel=1e-6):
    """Central finite differences of l(w) = <G, Z_u(w)> via the dense oracle."""
    n = graph.n_vertices
    marked = np.zeros(n, dtype=bool)
    marked[seeds.vertices] = True
    u = np.flatnonzero(~marked)

    def loss(w):
        z = dense_assignments(graph, w, seeds)
        return float((loss_grad_unmarked * z[u]).sum())

    grad = np.zeros(graph.n_edges)
    for e in range(graph.n_edges):
        h = h_rel * weights[e]
        wp, wm = weights.copy(), weights.copy()
        wp[e] += h
        wm[e] -= h
        grad[e] = (loss(wp) - loss(wm)) / (2 * h)
    return grad


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
