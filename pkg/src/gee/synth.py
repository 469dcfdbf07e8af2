"""Seeded synthetic graphs and embeddings for tests and experiments.

A planted-partition (stochastic block model) generator, a center-plus-noise
embedding generator whose noise knob emulates embedding quality, and the
two perturbations used to pull the density-based and link-based scores
apart: rewiring edges inside communities and inflating communities about
their centroids.
"""

from __future__ import annotations

import logging

import numpy as np

from .graph_io import Embedding, Graph, Partition

log = logging.getLogger(__name__)


def gen_sbm(n: int, blocks: int, p_in: float, p_out: float,
            directed: bool = False, seed: int = 0) -> tuple[Graph, Partition]:
    """Planted-partition random graph with near-equal block sizes."""
    if n < 2 or blocks < 1 or blocks > n:
        raise ValueError("need 1 <= blocks <= n and n >= 2")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError("need 0 <= p_out <= p_in <= 1")
    base, extra = divmod(n, blocks)
    sizes = [base + 1] * extra + [base] * (blocks - extra)
    labels = np.repeat(np.arange(blocks), sizes)
    rng = np.random.default_rng(seed)
    draws = rng.random((n, n))
    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    if directed:
        mask = draws < prob
        np.fill_diagonal(mask, False)
    else:
        mask = (draws < prob) & np.triu(np.ones((n, n), dtype=bool), 1)
    src, dst = np.nonzero(mask)
    edges = [(int(u), int(v), 1.0) for u, v in zip(src, dst)]
    graph = Graph.from_edges(n, edges, directed, weighted=False)
    return graph, Partition(labels, blocks)


def gen_embedding(partition: Partition, k: int, spread: float = 1.0,
                  noise: float = 0.0, seed: int = 0) -> Embedding:
    """Community centers at pairwise distance >= spread, plus Gaussian noise.

    The noise scale is noise * spread, so noise ~ 1 blurs communities into
    each other while noise = 0 collapses each community onto its center.
    """
    if k < 2:
        raise ValueError("embedding dimension must be at least 2")
    if spread <= 0 or noise < 0:
        raise ValueError("need spread > 0 and noise >= 0")
    ell = partition.n_communities
    centers = np.zeros((ell, k))
    if ell <= k:
        # scaled unit vectors: every center pair exactly `spread` apart
        np.fill_diagonal(centers[:, :ell], spread / np.sqrt(2.0))
    else:
        radius = spread / (2.0 * np.sin(np.pi / ell))
        angles = 2.0 * np.pi * np.arange(ell) / ell
        centers[:, 0] = radius * np.cos(angles)
        centers[:, 1] = radius * np.sin(angles)
    rng = np.random.default_rng(seed)
    n = partition.assign.shape[0]
    coords = centers[partition.assign] + rng.normal(0.0, noise * spread, size=(n, k))
    return Embedding.from_coords(coords)


def rewire_within(graph: Graph, partition: Partition, fraction: float,
                  seed: int = 0) -> Graph:
    """Replace a fraction of each community's internal edges with random
    internal non-edges.

    Endpoint communities are preserved, so the observed block-mass vector
    is unchanged; degrees are not preserved.  Replacement pairs are drawn
    from the original graph's non-edges; when a community has fewer
    non-edges than requested, only that many edges are rewired.
    """
    if not (0.0 <= fraction <= 1.0):
        raise ValueError("fraction must lie in [0, 1]")
    if partition.assign.shape[0] != graph.n:
        raise ValueError("partition does not match the graph")
    rng = np.random.default_rng(seed)
    labels = partition.assign
    intra = (labels[graph.src] == labels[graph.dst])
    edge_set = graph.edge_set()
    drop = np.zeros(graph.m, dtype=bool)
    new_edges: list[tuple[int, int, float]] = []
    for c in range(partition.n_communities):
        members = partition.members(c)
        edge_idx = np.flatnonzero(intra & (labels[graph.src] == c))
        target = int(round(fraction * edge_idx.shape[0]))
        if target == 0 or members.shape[0] < 2:
            continue
        candidates = []
        for ii, u in enumerate(members.tolist()):
            others = members.tolist() if graph.directed else members.tolist()[ii + 1:]
            for v in others:
                if u == v:
                    continue
                key = (u, v) if graph.directed else (min(u, v), max(u, v))
                if key not in edge_set:
                    candidates.append((u, v))
        actual = min(target, len(candidates))
        if actual < target:
            log.warning("community %d: only %d of %d requested rewires possible",
                        c, actual, target)
        if actual == 0:
            continue
        removed = rng.choice(edge_idx, size=actual, replace=False)
        added = rng.choice(len(candidates), size=actual, replace=False)
        drop[removed] = True
        for ei, ci in zip(removed.tolist(), added.tolist()):
            u, v = candidates[ci]
            new_edges.append((u, v, float(graph.weight[ei])))
    keep = ~drop
    edges = list(zip(graph.src[keep].tolist(), graph.dst[keep].tolist(),
                     graph.weight[keep].tolist()))
    edges.extend(new_edges)
    return Graph.from_edges(graph.n, edges, graph.directed,
                            node_ids=graph.node_ids, weighted=graph.weighted)


def rescale_communities(embedding: Embedding, partition: Partition,
                        factor: float) -> Embedding:
    """Inflate every community about its (unweighted) centroid."""
    if factor < 1.0:
        raise ValueError("factor must be >= 1")
    if partition.assign.shape[0] != embedding.n:
        raise ValueError("partition does not match the embedding")
    coords = embedding.coords.copy()
    for c in range(partition.n_communities):
        members = partition.members(c)
        centroid = coords[members].mean(axis=0)
        coords[members] = centroid + factor * (coords[members] - centroid)
    return Embedding.from_coords(coords)
