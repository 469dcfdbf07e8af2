"""Parsing, validation, and core containers for graphs, embeddings, partitions.

File formats are whitespace-separated text, UTF-8, with ``#`` comment lines:

* graph: one edge per line, ``src dst [weight]``; the weight column is
  optional and defaults to 1.0,
* embedding: one node per line, ``node_id x1 ... xk``,
* partition: one node per line, ``node_id label``.

Node ids are arbitrary whitespace-free tokens; internally every node is
re-indexed to ``0..n-1`` in order of first appearance and the id<->index
map is kept for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """An input file violates the expected text format or an invariant."""


@dataclass
class Graph:
    """Edge list with per-node strength vectors and contiguous indexing.

    Undirected graphs store each edge once; ``w_out`` and ``w_in`` are then
    the same total-strength vector.  Instances are treated as immutable
    after construction and are safe to share across threads.
    """

    n: int
    directed: bool
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    w_out: np.ndarray
    w_in: np.ndarray
    weighted: bool
    node_ids: tuple[str, ...] | None = None
    _edge_set: frozenset | None = field(default=None, repr=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Sequence[tuple[int, int, float]],
        directed: bool,
        node_ids: Sequence[str] | None = None,
        weighted: bool | None = None,
    ) -> "Graph":
        if n < 2:
            raise GraphFormatError(f"graph needs at least 2 nodes, got {n}")
        if not edges:
            raise GraphFormatError("graph has no edges")
        src = np.asarray([e[0] for e in edges], dtype=np.int64)
        dst = np.asarray([e[1] for e in edges], dtype=np.int64)
        weight = np.asarray([e[2] for e in edges], dtype=np.float64)
        if src.min() < 0 or max(src.max(), dst.max()) >= n:
            raise GraphFormatError("edge endpoint outside 0..n-1")
        if np.any(src == dst):
            k = int(np.argmax(src == dst))
            raise GraphFormatError(f"self-loop on node index {src[k]}")
        if np.any(weight <= 0) or not np.all(np.isfinite(weight)):
            raise GraphFormatError("edge weights must be finite and strictly positive")
        seen = set()
        for u, v in zip(src.tolist(), dst.tolist()):
            key = (u, v) if directed else (min(u, v), max(u, v))
            if key in seen:
                raise GraphFormatError(f"duplicate edge {u} -> {v}")
            seen.add(key)
        if directed:
            w_out = np.bincount(src, weights=weight, minlength=n)
            w_in = np.bincount(dst, weights=weight, minlength=n)
        else:
            strength = np.bincount(src, weights=weight, minlength=n)
            strength += np.bincount(dst, weights=weight, minlength=n)
            w_out = w_in = strength
        if weighted is None:
            weighted = bool(np.any(weight != 1.0))
        ids = tuple(node_ids) if node_ids is not None else None
        if ids is not None and len(ids) != n:
            raise GraphFormatError("node_ids length does not match n")
        return cls(n, directed, src, dst, weight, w_out, w_in, weighted, ids)

    @property
    def m(self) -> int:
        return int(self.src.shape[0])

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    def edge_set(self) -> frozenset:
        """Set of edge keys: ordered pairs (directed) or sorted pairs."""
        if self._edge_set is None:
            if self.directed:
                pairs = zip(self.src.tolist(), self.dst.tolist())
                self._edge_set = frozenset(pairs)
            else:
                self._edge_set = frozenset(
                    (min(u, v), max(u, v))
                    for u, v in zip(self.src.tolist(), self.dst.tolist())
                )
        return self._edge_set

    def has_edge(self, u: int, v: int) -> bool:
        key = (u, v) if self.directed else (min(u, v), max(u, v))
        return key in self.edge_set()

    def index_of(self, node_id: str) -> int:
        if self.node_ids is None:
            return int(node_id)
        return self.node_ids.index(node_id)

    def ids(self) -> tuple[str, ...]:
        if self.node_ids is not None:
            return self.node_ids
        return tuple(str(i) for i in range(self.n))


@dataclass
class Embedding:
    """An n x k coordinate matrix aligned with a graph's node indexing."""

    n: int
    k: int
    coords: np.ndarray

    @classmethod
    def from_coords(cls, coords: np.ndarray) -> "Embedding":
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 2:
            raise GraphFormatError("embedding coordinates must be a 2-d matrix")
        n, k = coords.shape
        if n < 2:
            raise GraphFormatError("embedding needs at least 2 nodes")
        if not np.all(np.isfinite(coords)):
            raise GraphFormatError("embedding contains non-finite coordinates")
        if np.all(coords == coords[0]):
            raise GraphFormatError("all embedding rows identical; distances carry no information")
        return cls(n, k, coords)


@dataclass
class Partition:
    """Node -> community assignment with contiguous labels 0..ell-1.

    Every community is non-empty.  A single-community partition is a valid
    container (clustering may legitimately produce one) but is rejected by
    the loaders and by density-based scoring, where it is meaningless.
    """

    assign: np.ndarray
    n_communities: int

    @classmethod
    def from_labels(cls, labels: Sequence[int] | np.ndarray) -> "Partition":
        labels = list(labels)
        if not labels:
            raise GraphFormatError("empty partition")
        remap: dict = {}
        assign = np.empty(len(labels), dtype=np.int64)
        for i, lab in enumerate(labels):
            if lab not in remap:
                remap[lab] = len(remap)
            assign[i] = remap[lab]
        return cls(assign, len(remap))

    def __post_init__(self) -> None:
        self.assign = np.asarray(self.assign, dtype=np.int64)
        ell = self.n_communities
        if ell < 1:
            raise GraphFormatError("partition needs at least one community")
        counts = np.bincount(self.assign, minlength=ell)
        if counts.shape[0] > ell or np.any(counts == 0):
            raise GraphFormatError("community labels must be contiguous 0..ell-1 and non-empty")

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assign == c)


def _data_lines(path: Path) -> Iterator[tuple[int, list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def load_graph(path, directed: bool = False) -> Graph:
    """Parse an edge-list file; rejects self-loops, duplicates, bad weights."""
    path = Path(path)
    index: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    seen: set = set()
    has_weight_column = False
    for lineno, tok in _data_lines(path):
        if len(tok) not in (2, 3):
            raise GraphFormatError(f"{path}:{lineno}: expected 'src dst [weight]'")
        sid, did = tok[0], tok[1]
        if sid == did:
            raise GraphFormatError(f"{path}:{lineno}: self-loop on node {sid!r}")
        if len(tok) == 3:
            has_weight_column = True
            try:
                w = float(tok[2])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: bad weight {tok[2]!r}") from None
            if not np.isfinite(w) or w <= 0:
                raise GraphFormatError(f"{path}:{lineno}: weight must be finite and > 0")
        else:
            w = 1.0
        u = index.setdefault(sid, len(index))
        v = index.setdefault(did, len(index))
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"{path}:{lineno}: duplicate edge {sid} -> {did}")
        seen.add(key)
        edges.append((u, v, w))
    if not edges:
        raise GraphFormatError(f"{path}: empty graph")
    node_ids = tuple(index.keys())
    return Graph.from_edges(len(node_ids), edges, directed, node_ids=node_ids,
                            weighted=has_weight_column or None)


def load_embedding(path, graph: Graph) -> Embedding:
    """Parse a coordinate file and align rows to the graph's indexing."""
    path = Path(path)
    ids = graph.ids()
    lookup = {nid: i for i, nid in enumerate(ids)}
    coords = np.full((graph.n, 0), np.nan)
    k = None
    filled = np.zeros(graph.n, dtype=bool)
    for lineno, tok in _data_lines(path):
        if len(tok) < 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'node_id x1 ... xk'")
        nid = tok[0]
        if nid not in lookup:
            raise GraphFormatError(f"{path}:{lineno}: unknown node {nid!r}")
        row = np.asarray([float(x) for x in tok[1:]], dtype=np.float64)
        if k is None:
            k = row.shape[0]
            coords = np.full((graph.n, k), np.nan)
        elif row.shape[0] != k:
            raise GraphFormatError(f"{path}:{lineno}: inconsistent dimension "
                                   f"({row.shape[0]} != {k})")
        i = lookup[nid]
        if filled[i]:
            raise GraphFormatError(f"{path}:{lineno}: duplicate row for node {nid!r}")
        if not np.all(np.isfinite(row)):
            raise GraphFormatError(f"{path}:{lineno}: non-finite coordinate for node {nid!r}")
        coords[i] = row
        filled[i] = True
    if not np.all(filled):
        missing = ids[int(np.argmin(filled))]
        raise GraphFormatError(f"{path}: missing node {missing!r}")
    return Embedding.from_coords(coords)


def load_partition(path, graph: Graph) -> Partition:
    """Parse a community file; labels are relabelled to 0..ell-1."""
    path = Path(path)
    ids = graph.ids()
    lookup = {nid: i for i, nid in enumerate(ids)}
    labels: list = [None] * graph.n
    for lineno, tok in _data_lines(path):
        if len(tok) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'node_id label'")
        nid, lab = tok
        if nid not in lookup:
            raise GraphFormatError(f"{path}:{lineno}: unknown node {nid!r}")
        i = lookup[nid]
        if labels[i] is not None:
            raise GraphFormatError(f"{path}:{lineno}: duplicate assignment for node {nid!r}")
        labels[i] = lab
    for i, lab in enumerate(labels):
        if lab is None:
            raise GraphFormatError(f"{path}: missing node {ids[i]!r}")
    part = Partition.from_labels(labels)
    if part.n_communities < 2:
        raise GraphFormatError(f"{path}: single community; density scores are undefined")
    return part


def write_graph(graph: Graph, path) -> None:
    ids = graph.ids()
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in zip(graph.src.tolist(), graph.dst.tolist(), graph.weight.tolist()):
            if graph.weighted:
                fh.write(f"{ids[u]} {ids[v]} {w!r}\n")
            else:
                fh.write(f"{ids[u]} {ids[v]}\n")


def write_embedding(embedding: Embedding, path, node_ids: Sequence[str] | None = None) -> None:
    ids = node_ids if node_ids is not None else [str(i) for i in range(embedding.n)]
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(embedding.n):
            row = " ".join(repr(x) for x in embedding.coords[i].tolist())
            fh.write(f"{ids[i]} {row}\n")


def write_partition(partition: Partition, path, node_ids: Sequence[str] | None = None) -> None:
    ids = node_ids if node_ids is not None else [str(i) for i in range(partition.assign.shape[0])]
    with open(path, "w", encoding="utf-8") as fh:
        for i, c in enumerate(partition.assign.tolist()):
            fh.write(f"{ids[i]} {c}\n")
