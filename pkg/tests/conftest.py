"""Shared fixtures and generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from gee import Embedding, Graph, check_feasibility


def random_digraph(n: int, rng: np.random.Generator, density: float = 0.15,
                   weighted: bool = False) -> Graph:
    """Random feasible directed graph (no star, no two-node degeneracy)."""
    for _ in range(200):
        mask = rng.random((n, n)) < density
        np.fill_diagonal(mask, False)
        src, dst = np.nonzero(mask)
        if src.size == 0:
            continue
        if weighted:
            w = rng.uniform(0.5, 3.0, size=src.size)
        else:
            w = np.ones(src.size)
        g = Graph.from_edges(n, list(zip(src.tolist(), dst.tolist(), w.tolist())),
                             directed=True, weighted=weighted)
        if check_feasibility(g).feasible:
            return g
    raise RuntimeError("could not generate a feasible digraph")


def random_embedding(n: int, k: int, rng: np.random.Generator) -> Embedding:
    return Embedding.from_coords(rng.normal(size=(n, k)))


def spectral_embedding(graph: Graph, k: int) -> Embedding:
    """Leading-eigenvector coordinates of the symmetrized adjacency.

    Scaling each eigenvector by sqrt(max(eigenvalue, 0)) makes squared
    distances track adjacency, so edge endpoints sit closer than typical
    non-adjacent pairs.
    """
    a = np.zeros((graph.n, graph.n))
    a[graph.src, graph.dst] += graph.weight
    a[graph.dst, graph.src] += graph.weight
    vals, vecs = np.linalg.eigh(a)
    top = np.argsort(vals)[::-1][:k]
    coords = vecs[:, top] * np.sqrt(np.clip(vals[top], 0.0, None))
    return Embedding.from_coords(coords)


def exhaustive_auc(p_matrix: np.ndarray, graph: Graph, tie_rtol: float = 1e-6) -> float:
    """Double loop over all edge / non-edge pairs with the 0.5 tie rule."""
    pos = p_matrix[graph.src, graph.dst]
    if graph.directed:
        neg_mask = np.ones((graph.n, graph.n), dtype=bool)
        np.fill_diagonal(neg_mask, False)
        neg_mask[graph.src, graph.dst] = False
    else:
        neg_mask = np.triu(np.ones((graph.n, graph.n), dtype=bool), 1)
        neg_mask[graph.src, graph.dst] = False
        neg_mask[graph.dst, graph.src] = False
        neg_mask = np.triu(neg_mask, 1)
    neg = p_matrix[neg_mask]
    gap = tie_rtol * np.maximum(np.abs(pos)[:, None], np.abs(neg)[None, :])
    wins = (pos[:, None] > neg[None, :] + gap).sum()
    losses = (neg[None, :] > pos[:, None] + gap).sum()
    total = pos.shape[0] * neg.shape[0]
    return (wins + 0.5 * (total - wins - losses)) / total


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


@pytest.fixture
def tri_cycle_file(tmp_path):
    return write_lines(tmp_path / "tri.txt", ["a b", "b c", "c a"])
