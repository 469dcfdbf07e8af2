"""Community detection used when no partition is supplied.

Louvain modularity optimization (two-phase local moving + aggregation) on
the symmetrized weighted graph, plus an ensemble variant for unweighted
graphs that re-weights each edge by how often its endpoints are
co-clustered across independent level-1 passes before the final run.
"""

from __future__ import annotations

import numpy as np

from .graph_io import Graph, Partition

ECG_MIN_WEIGHT = 0.05
ECG_ENSEMBLE_SIZE = 16

_GAIN_EPS = 1e-12


def _symmetrized(graph: Graph, unit_weights: bool = False) -> list[dict[int, float]]:
    """Undirected adjacency dicts; opposite directed edges merge their weight."""
    adj: list[dict[int, float]] = [dict() for _ in range(graph.n)]
    weights = np.ones(graph.m) if unit_weights else graph.weight
    for u, v, w in zip(graph.src.tolist(), graph.dst.tolist(), weights.tolist()):
        adj[u][v] = adj[u].get(v, 0.0) + w
        adj[v][u] = adj[v].get(u, 0.0) + w
    return adj


def _degrees(adj: list[dict[int, float]], self_loops: np.ndarray) -> np.ndarray:
    k = np.array([sum(d.values()) for d in adj], dtype=np.float64)
    return k + 2.0 * self_loops


def _local_moving(adj, self_loops, rng) -> tuple[np.ndarray, bool]:
    """Greedy modularity moves until a full sweep changes nothing.

    Ties between candidate communities keep the first (lowest label) one,
    and a node only moves on a strictly positive gain over staying put.
    """
    n = len(adj)
    k = _degrees(adj, self_loops)
    m2 = k.sum()
    labels = np.arange(n, dtype=np.int64)
    tot = k.copy()
    order = rng.permutation(n)
    improved = False
    while True:
        moves = 0
        for v in order.tolist():
            c0 = int(labels[v])
            links: dict[int, float] = {}
            for u, w in adj[v].items():
                cu = int(labels[u])
                links[cu] = links.get(cu, 0.0) + w
            tot[c0] -= k[v]
            best_c = c0
            best_gain = links.get(c0, 0.0) - tot[c0] * k[v] / m2
            for c in sorted(links):
                if c == c0:
                    continue
                gain = links[c] - tot[c] * k[v] / m2
                if gain > best_gain + _GAIN_EPS:
                    best_c, best_gain = c, gain
            tot[best_c] += k[v]
            if best_c != c0:
                labels[v] = best_c
                moves += 1
        if moves == 0:
            break
        improved = True
    return labels, improved


def _aggregate(adj, self_loops, labels) -> tuple[list[dict[int, float]], np.ndarray, dict[int, int]]:
    remap = {c: i for i, c in enumerate(sorted(set(labels.tolist())))}
    nn = len(remap)
    new_adj: list[dict[int, float]] = [dict() for _ in range(nn)]
    new_self = np.zeros(nn)
    internal = np.zeros(nn)
    for v in range(len(adj)):
        c = remap[int(labels[v])]
        new_self[c] += self_loops[v]
        for u, w in adj[v].items():
            cu = remap[int(labels[u])]
            if cu == c:
                internal[c] += w  # every internal edge visited from both ends
            else:
                d = new_adj[c]
                d[cu] = d.get(cu, 0.0) + w
    new_self += internal / 2.0
    return new_adj, new_self, remap


def louvain(graph: Graph, seed: int = 0) -> Partition:
    """Two-phase Louvain on the symmetrized weighted graph.

    Deterministic for a fixed (graph, seed); directed graphs are clustered
    on weight(u, v) + weight(v, u).
    """
    rng = np.random.default_rng(seed)
    adj = _symmetrized(graph)
    self_loops = np.zeros(graph.n)
    assignment = np.arange(graph.n, dtype=np.int64)
    while True:
        labels, improved = _local_moving(adj, self_loops, rng)
        if not improved:
            break
        adj, self_loops, remap = _aggregate(adj, self_loops, labels)
        lookup = np.array([remap[int(labels[i])] for i in range(len(labels))],
                          dtype=np.int64)
        assignment = lookup[assignment]
        if len(adj) <= 1:
            break
    return Partition.from_labels(assignment.tolist())


def level_one_labels(graph: Graph, seed) -> np.ndarray:
    """A single local-moving phase on the unit-weight symmetrized graph."""
    rng = np.random.default_rng(seed)
    adj = _symmetrized(graph, unit_weights=True)
    labels, _ = _local_moving(adj, np.zeros(graph.n), rng)
    return labels


def ecg_edge_weights(graph: Graph, ensemble_size: int = ECG_ENSEMBLE_SIZE,
                     seed: int = 0, min_weight: float = ECG_MIN_WEIGHT) -> np.ndarray:
    """Per-edge co-clustering frequency across level-1 passes, floored.

    Each pass owns an independent generator derived from (seed, pass)."""
    if ensemble_size < 2:
        raise ValueError("ensemble_size must be at least 2")
    votes = np.zeros(graph.m)
    for p in range(ensemble_size):
        labels = level_one_labels(graph, [seed, p])
        votes += labels[graph.src] == labels[graph.dst]
    return np.maximum(min_weight, votes / ensemble_size)


def ecg(graph: Graph, ensemble_size: int = ECG_ENSEMBLE_SIZE, seed: int = 0,
        min_weight: float = ECG_MIN_WEIGHT) -> Partition:
    """Ensemble consensus clustering for unweighted graphs."""
    if graph.weighted:
        raise ValueError("ecg expects an unweighted graph; use louvain instead")
    weights = ecg_edge_weights(graph, ensemble_size, seed, min_weight)
    edges = list(zip(graph.src.tolist(), graph.dst.tolist(), weights.tolist()))
    reweighted = Graph.from_edges(graph.n, edges, graph.directed,
                                  node_ids=graph.node_ids, weighted=True)
    return louvain(reweighted, seed=ensemble_size * 1000003 + seed)


def modularity(graph: Graph, partition: Partition) -> float:
    """Newman modularity of a partition on the symmetrized weighted graph."""
    labels = partition.assign
    sym_w = graph.weight
    a = labels[graph.src]
    b = labels[graph.dst]
    total = float(sym_w.sum())
    internal = np.zeros(partition.n_communities)
    np.add.at(internal, a[a == b], sym_w[a == b])
    strength = np.zeros(graph.n)
    np.add.at(strength, graph.src, sym_w)
    np.add.at(strength, graph.dst, sym_w)
    k_c = np.zeros(partition.n_communities)
    np.add.at(k_c, labels, strength)
    return float((internal / total - (k_c / (2.0 * total)) ** 2).sum())
