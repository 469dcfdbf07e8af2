"""Link-based (local) embedding score.

The null model's pair probabilities are used as a link predictor: the
score is one minus the best sampled AUC over the kernel-exponent grid.
One pair sample is drawn per evaluation and reused across the whole grid,
so the curve is a deterministic function of (graph, embedding, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gcl import DEFAULT_MAX_ITER, DEFAULT_TOL, GclModel, ModelCache
from .graph_io import Embedding, Graph
from .scoring_global import SearchOptions, alpha_grid_search

# Two probabilities closer than this relative gap count as a tie; the gap
# must exceed the fitting residual so that symmetric systems tie cleanly.
TIE_RTOL = 1e-6

_REJECTION_FACTOR = 100


@dataclass
class PairSample:
    """k sampled edges and k sampled ordered non-adjacent pairs."""

    pos_src: np.ndarray
    pos_dst: np.ndarray
    pos_weight: np.ndarray
    neg_src: np.ndarray
    neg_dst: np.ndarray
    k: int
    seed: int


@dataclass
class LocalScoreResult:
    score: float
    best_alpha: float
    ci_halfwidth: float
    curve: list[tuple[float, float]]  # (alpha, sampled AUC)
    failures: list[tuple[float, float]] = field(default_factory=list)


def sample_pairs(graph: Graph, k: int, seed: int = 0) -> PairSample:
    """Uniform with-replacement samples from the edge and non-edge sets.

    Negative pairs are found by rejection; a complete graph (no negatives)
    or an excessive rejection rate is an error.
    """
    if k < 1:
        raise ValueError("k must be positive")
    n, m = graph.n, graph.m
    n_pairs = n * (n - 1) if graph.directed else n * (n - 1) // 2
    if m >= n_pairs:
        raise ValueError("graph is complete; there are no negative pairs")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, m, size=k)
    pos_src = graph.src[idx]
    pos_dst = graph.dst[idx]
    pos_weight = graph.weight[idx]
    edge_set = graph.edge_set()
    neg_src = np.empty(k, dtype=np.int64)
    neg_dst = np.empty(k, dtype=np.int64)
    have = 0
    attempts = 0
    max_attempts = _REJECTION_FACTOR * k
    while have < k:
        budget = min(max(k - have, 1024), max_attempts - attempts)
        if budget <= 0:
            raise ValueError(
                f"negative sampling exceeded {max_attempts} attempts; "
                "the graph is too close to complete")
        u = rng.integers(0, n, size=budget)
        v = rng.integers(0, n, size=budget)
        attempts += budget
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            key = (a, b) if graph.directed else (min(a, b), max(a, b))
            if key in edge_set:
                continue
            neg_src[have] = a
            neg_dst[have] = b
            have += 1
            if have == k:
                break
    return PairSample(pos_src, pos_dst, pos_weight, neg_src, neg_dst, k, seed)


def auc_from_probabilities(
    p_pos: np.ndarray,
    p_neg: np.ndarray,
    pos_weight: np.ndarray | None = None,
) -> tuple[float, float]:
    """Paired comparison AUC estimate with a 95% normal CI half-width.

    Ties count one half.  With weights, each indicator is scaled by the
    edge weight divided by the mean weight of the sampled edges.
    """
    p_pos = np.asarray(p_pos, dtype=np.float64)
    p_neg = np.asarray(p_neg, dtype=np.float64)
    k = p_pos.shape[0]
    tie_gap = TIE_RTOL * np.maximum(np.maximum(np.abs(p_pos), np.abs(p_neg)), 1e-300)
    indicator = np.where(p_pos > p_neg + tie_gap, 1.0,
                         np.where(p_neg > p_pos + tie_gap, 0.0, 0.5))
    if pos_weight is not None:
        mean_w = float(np.mean(pos_weight))
        if mean_w <= 0:
            raise ValueError("non-positive mean edge weight")
        indicator = indicator * (np.asarray(pos_weight, dtype=np.float64) / mean_w)
    p_hat = float(indicator.mean())
    ci = 1.96 * np.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / k)
    return p_hat, float(ci)


def auc_estimate(model: GclModel, sample: PairSample,
                 weighted: bool = False) -> tuple[float, float]:
    """Sampled AUC of the model's pair probabilities on a fixed sample."""
    p_pos = model.pair_probability(sample.pos_src, sample.pos_dst)
    p_neg = model.pair_probability(sample.neg_src, sample.neg_dst)
    return auc_from_probabilities(p_pos, p_neg,
                                  sample.pos_weight if weighted else None)


def local_score(
    graph: Graph,
    embedding: Embedding,
    opts: SearchOptions | None = None,
    seed: int = 0,
    *,
    cache: ModelCache | None = None,
    weighted: bool | None = None,
    metric: str = "l2",
    clip: tuple[float, float] | None = None,
    fit_tol: float = DEFAULT_TOL,
    fit_max_iter: int = DEFAULT_MAX_ITER,
) -> LocalScoreResult:
    """One minus the best sampled AUC over the exponent grid."""
    opts = opts or SearchOptions()
    if weighted is None:
        weighted = graph.weighted
    if cache is None:
        cache = ModelCache(graph, embedding, metric=metric, clip=clip,
                           tol=fit_tol, max_iter=fit_max_iter)
    sample = sample_pairs(graph, opts.auc_samples, seed)
    by_alpha: dict[float, tuple[float, float]] = {}

    def evaluate(alpha: float) -> float:
        model = cache.model(alpha)
        p_hat, ci = auc_estimate(model, sample, weighted)
        by_alpha[alpha] = (p_hat, ci)
        return 1.0 - p_hat

    best, best_alpha, curve, failures = alpha_grid_search(evaluate, opts)
    auc_curve = [(a, 1.0 - d) for a, d in curve]
    ci = by_alpha[best_alpha][1]
    return LocalScoreResult(best, best_alpha, ci, auc_curve, failures)
