"""Density-based (global) embedding score.

The observed community-block edge-mass distribution is compared against
the null model's expected one with the Jensen-Shannon divergence (base 2,
so values live in [0, 1]).  The kernel exponent is searched on a fixed
grid starting at 0, stopping after five consecutive non-improving values;
the best divergence is the score.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gcl import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    FitNonConvergenceError,
    GclModel,
    ModelCache,
    block_mass_matrix,
    expected_block_mass,
)
from .graph_io import Embedding, Graph, Partition


@dataclass(frozen=True)
class SearchOptions:
    """Grid-search and sampling knobs shared by both scores."""

    alpha_step: float = 0.25
    alpha_max: float = 32.0
    patience: int = 5
    split_jsd: bool = False
    auc_samples: int = 10000

    def __post_init__(self) -> None:
        if self.alpha_step <= 0 or self.patience < 1 or self.auc_samples < 1:
            raise ValueError("invalid search options")


@dataclass
class GlobalScoreResult:
    score: float
    best_alpha: float
    curve: list[tuple[float, float]]
    failures: list[tuple[float, float]] = field(default_factory=list)


def entropy_bits(v: np.ndarray) -> float:
    vv = v[v > 0]
    return float(-(vv * np.log2(vv)).sum())


def jsd(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in bits between two mass vectors.

    Zero entries contribute nothing (0 * log 0 := 0).  Identical inputs
    give exactly 0.0; disjoint supports give 1.0.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    return max(0.0, entropy_bits(m) - 0.5 * (entropy_bits(p) + entropy_bits(q)))


def flatten_block_matrix(mass: np.ndarray, directed: bool) -> np.ndarray:
    """Canonical vector ordering: off-diagonal block pairs, then diagonal.

    Directed matrices emit (i, j) and (j, i) back to back for i < j; the
    upper-triangular undirected form emits one entry per unordered pair.
    """
    ell = mass.shape[0]
    out: list[float] = []
    for i in range(ell):
        for j in range(i + 1, ell):
            out.append(mass[i, j])
            if directed:
                out.append(mass[j, i])
    out.extend(mass[i, i] for i in range(ell))
    return np.asarray(out, dtype=np.float64)


def density_vector_length(ell: int, directed: bool) -> int:
    off = ell * (ell - 1)
    return (off if directed else off // 2) + ell


def _require_multiple_communities(partition: Partition) -> None:
    if partition.n_communities < 2:
        raise ValueError("density score needs at least 2 communities")


def graph_block_mass(graph: Graph, partition: Partition) -> np.ndarray:
    """Observed edge-weight proportions between and within communities."""
    labels = partition.assign
    ell = partition.n_communities
    a = labels[graph.src]
    b = labels[graph.dst]
    mass = np.zeros((ell, ell))
    if graph.directed:
        np.add.at(mass, (a, b), graph.weight)
    else:
        np.add.at(mass, (np.minimum(a, b), np.maximum(a, b)), graph.weight)
    return mass / graph.total_weight


def graph_density_vector(graph: Graph, partition: Partition) -> np.ndarray:
    """Observed block-mass vector; depends on the graph and partition only."""
    if partition.assign.shape[0] != graph.n:
        raise ValueError("partition does not match the graph")
    _require_multiple_communities(partition)
    return flatten_block_matrix(graph_block_mass(graph, partition), graph.directed)


def model_density_vector(model: GclModel, graph: Graph, partition: Partition) -> np.ndarray:
    """Expected block-mass vector under a fitted model, same ordering."""
    _require_multiple_communities(partition)
    return flatten_block_matrix(expected_block_mass(model, graph, partition),
                                graph.directed)


def split_divergence(c: np.ndarray, b: np.ndarray, ell: int, directed: bool) -> float:
    """Average of the divergences of the renormalized external and internal parts.

    A part with zero mass on both sides contributes 0; zero mass on exactly
    one side counts as maximal divergence.
    """
    n_off = len(c) - ell
    halves = []
    for sl in (slice(0, n_off), slice(n_off, None)):
        cs, bs = c[sl], b[sl]
        ct, bt = cs.sum(), bs.sum()
        if ct == 0 and bt == 0:
            halves.append(0.0)
        elif ct == 0 or bt == 0:
            halves.append(1.0)
        else:
            halves.append(jsd(cs / ct, bs / bt))
    return 0.5 * (halves[0] + halves[1])


def alpha_grid_search(
    evaluate: Callable[[float], float],
    opts: SearchOptions,
) -> tuple[float, float, list[tuple[float, float]], list[tuple[float, float]]]:
    """Minimize over the exponent grid 0, step, 2*step, ...

    Stops once `patience` consecutive values fail to improve the running
    minimum or the grid cap is reached.  Fit failures are recorded with
    their residual and count as non-improving.
    """
    best = np.inf
    best_alpha = None
    curve: list[tuple[float, float]] = []
    failures: list[tuple[float, float]] = []
    streak = 0
    step_index = 0
    while True:
        alpha = step_index * opts.alpha_step
        if alpha > opts.alpha_max:
            break
        try:
            value = float(evaluate(alpha))
        except FitNonConvergenceError as exc:
            failures.append((alpha, exc.residual))
            streak += 1
        else:
            curve.append((alpha, value))
            if value < best:
                best = value
                best_alpha = alpha
                streak = 0
            else:
                streak += 1
        if streak >= opts.patience:
            break
        step_index += 1
    if best_alpha is None:
        raise FitNonConvergenceError(
            "model fitting failed at every grid value",
            failures[-1][1] if failures else np.nan, 0)
    return best, best_alpha, curve, failures


def global_score(
    graph: Graph,
    embedding: Embedding,
    partition: Partition,
    opts: SearchOptions | None = None,
    *,
    cache: ModelCache | None = None,
    metric: str = "l2",
    clip: tuple[float, float] | None = None,
    fit_tol: float = DEFAULT_TOL,
    fit_max_iter: int = DEFAULT_MAX_ITER,
) -> GlobalScoreResult:
    """Best-fit divergence between observed and expected block masses."""
    opts = opts or SearchOptions()
    _require_multiple_communities(partition)
    if cache is None:
        cache = ModelCache(graph, embedding, metric=metric, clip=clip,
                           tol=fit_tol, max_iter=fit_max_iter)
    c = graph_density_vector(graph, partition)
    ell = partition.n_communities

    def evaluate(alpha: float) -> float:
        model = cache.model(alpha)
        b = model_density_vector(model, graph, partition)
        if opts.split_jsd:
            return split_divergence(c, b, ell, graph.directed)
        return jsd(c, b)

    best, best_alpha, curve, failures = alpha_grid_search(evaluate, opts)
    return GlobalScoreResult(best, best_alpha, curve, failures)
