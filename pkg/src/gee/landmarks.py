"""Landmark approximation for scoring large graphs.

The community partition is refined into n' parts of geometrically close
same-community nodes; each part becomes a landmark placed at the
strength-weighted center of mass of its members, carrying a self-loop
whose "distance" encodes the part's spread.  The null model is fitted on
the landmarks (with self-loops), which costs O(n'^2) instead of O(n^2).
Block masses aggregate landmark expectations; sampled pair probabilities
use landmark weights split proportionally among members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gcl import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DistanceKernel,
    GclModel,
    _gauge_fix,
    block_mass_matrix,
    fit_weights,
    pair_distance,
    pairwise_distances,
)
from .graph_io import Embedding, Graph, Partition
from .scoring_global import (
    GlobalScoreResult,
    SearchOptions,
    alpha_grid_search,
    flatten_block_matrix,
    graph_density_vector,
    jsd,
    split_divergence,
)
from .scoring_local import LocalScoreResult, auc_from_probabilities, sample_pairs

# Exact scoring is the default below this many nodes.
LANDMARK_NODE_THRESHOLD = 10_000

DEFAULT_SPLIT_FACTOR = 4


def default_landmark_count(n: int, n_communities: int) -> int:
    """At least 4*sqrt(n) landmarks and at least 4 per community."""
    return min(n, max(math.ceil(4.0 * math.sqrt(n)), 4 * n_communities))


@dataclass(frozen=True)
class LandmarkConfig:
    n_landmarks: int | None = None  # None: default_landmark_count
    split_factor: int = DEFAULT_SPLIT_FACTOR
    loops: bool = True
    seed: int = 0
    metric: str = "l2"
    clip: tuple[float, float] | None = None
    fit_tol: float = DEFAULT_TOL
    fit_max_iter: int = DEFAULT_MAX_ITER
    damping: float = DEFAULT_DAMPING

    def resolve_count(self, n: int, n_communities: int) -> int:
        if self.n_landmarks is None:
            return default_landmark_count(n, n_communities)
        return self.n_landmarks


@dataclass
class LandmarkSet:
    """Refined partition of the nodes with per-part geometry and strengths."""

    n_prime: int
    positions: np.ndarray      # n' x k
    self_distance: np.ndarray  # n', sqrt of mass-weighted mean squared offset
    errors: np.ndarray         # n', mass-weighted sum of squared offsets
    member_of: np.ndarray      # node -> landmark
    community_of: np.ndarray   # landmark -> community
    w_prime_out: np.ndarray
    w_prime_in: np.ndarray
    n_communities: int


def _node_mass(graph: Graph) -> np.ndarray:
    # total degree for directed graphs, plain strength otherwise
    return graph.w_out + graph.w_in if graph.directed else graph.w_out


def _part_stats(coords: np.ndarray, mass: np.ndarray,
                members: np.ndarray) -> tuple[np.ndarray, float, float]:
    pts = coords[members]
    w = mass[members]
    total = float(w.sum())
    if np.all(pts == pts[0]):
        # coincident members: the error must be exactly zero
        return pts[0].copy(), 0.0, total
    if total > 0:
        pos = (w[:, None] * pts).sum(axis=0) / total
    else:
        pos = pts.mean(axis=0)
    sq = ((pts - pos) ** 2).sum(axis=1)
    return pos, float((w * sq).sum()), total


def _weighted_two_means(pts: np.ndarray, w: np.ndarray, rng,
                        max_iter: int = 50) -> np.ndarray:
    """Split points into two non-empty weighted clusters; boolean mask."""
    n = pts.shape[0]
    total = w.sum()
    probs = w / total if total > 0 else np.full(n, 1.0 / n)
    i0 = int(rng.choice(n, p=probs))
    d0 = ((pts - pts[i0]) ** 2).sum(axis=1)
    i1 = int(np.argmax(d0))
    if d0[i1] == 0.0:
        raise ValueError("cannot split a part with coincident coordinates")
    centers = np.stack([pts[i0], pts[i1]])
    assign = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        d = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d[:, 1] < d[:, 0]
        for side in (False, True):
            if not np.any(new_assign == side):
                far = int(np.argmax(d[:, 0 if side else 1]))
                new_assign[far] = side
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for side in (False, True):
            sel = assign == side
            ws = w[sel]
            if ws.sum() > 0:
                centers[int(side)] = (ws[:, None] * pts[sel]).sum(axis=0) / ws.sum()
            else:
                centers[int(side)] = pts[sel].mean(axis=0)
    return assign


def refine_partition(graph: Graph, embedding: Embedding, partition: Partition,
                     n_prime_target: int, seed: int = 0,
                     split_factor: int = DEFAULT_SPLIT_FACTOR) -> LandmarkSet:
    """Split communities into geometrically tight parts and build landmarks.

    The part with the largest weighted within-part squared error is split
    by weighted 2-means until the target count is reached (or nothing is
    splittable).  If the target does not exceed the community count, every
    community is instead force-split into `split_factor` parts.
    """
    if n_prime_target > graph.n:
        raise ValueError(f"cannot place {n_prime_target} landmarks on {graph.n} nodes")
    if partition.assign.shape[0] != graph.n:
        raise ValueError("partition does not match the graph")
    coords = embedding.coords
    mass = _node_mass(graph)
    rng = np.random.default_rng(seed)

    parts: list[np.ndarray] = []
    communities: list[int] = []
    for c in range(partition.n_communities):
        parts.append(partition.members(c))
        communities.append(c)
    errors = [_part_stats(coords, mass, p)[1] for p in parts]

    def split(idx: int) -> bool:
        members = parts[idx]
        if members.shape[0] < 2 or errors[idx] <= 0.0:
            return False
        side = _weighted_two_means(coords[members], mass[members], rng)
        a, b = members[~side], members[side]
        parts[idx] = a
        errors[idx] = _part_stats(coords, mass, a)[1]
        parts.append(b)
        communities.append(communities[idx])
        errors.append(_part_stats(coords, mass, b)[1])
        return True

    if n_prime_target <= partition.n_communities:
        for c in range(partition.n_communities):
            for _ in range(split_factor - 1):
                own = [i for i, cc in enumerate(communities) if cc == c]
                order = sorted(own, key=lambda i: -errors[i])
                if not any(split(i) for i in order):
                    break
    else:
        while len(parts) < n_prime_target:
            order = sorted(range(len(parts)), key=lambda i: -errors[i])
            if not any(split(i) for i in order):
                break

    n_prime = len(parts)
    k = coords.shape[1]
    positions = np.zeros((n_prime, k))
    self_distance = np.zeros(n_prime)
    err = np.zeros(n_prime)
    member_of = np.empty(graph.n, dtype=np.int64)
    for i, members in enumerate(parts):
        pos, e, total = _part_stats(coords, mass, members)
        positions[i] = pos
        err[i] = e
        self_distance[i] = math.sqrt(e / total) if total > 0 else 0.0
        member_of[members] = i
    w_prime_out = np.bincount(member_of, weights=graph.w_out, minlength=n_prime)
    w_prime_in = np.bincount(member_of, weights=graph.w_in, minlength=n_prime)
    return LandmarkSet(n_prime, positions, self_distance, err, member_of,
                       np.asarray(communities, dtype=np.int64),
                       w_prime_out, w_prime_in, partition.n_communities)


class LandmarkModels:
    """Fit cache for the landmark system across kernel exponents.

    The kernel domain is the landmark-position extremes widened by the
    largest self-distance on both ends, which keeps loop distances inside
    it; distances are clamped into the domain before kernel evaluation.
    """

    def __init__(self, graph: Graph, landmark_set: LandmarkSet,
                 config: LandmarkConfig):
        if landmark_set.n_prime < 2:
            raise ValueError("need at least 2 landmarks")
        self.graph = graph
        self.set = landmark_set
        self.config = config
        self.distances = pairwise_distances(landmark_set.positions, config.metric)
        off = ~np.eye(landmark_set.n_prime, dtype=bool)
        d_min_pos = float(self.distances[off].min())
        d_max_pos = float(self.distances[off].max())
        pad = float(landmark_set.self_distance.max()) if config.loops else 0.0
        self.d_min = max(0.0, d_min_pos - pad)
        self.d_max = d_max_pos + pad
        if self.d_max == 0.0:
            raise ValueError("all landmark positions coincide")
        self.loop_distances = np.clip(landmark_set.self_distance, self.d_min, self.d_max)
        self._models: dict[float, GclModel] = {}

    def model(self, alpha: float) -> GclModel:
        key = float(alpha)
        if key in self._models:
            return self._models[key]
        cfg = self.config
        kernel = DistanceKernel(key, self.d_min, self.d_max, cfg.clip)
        K = kernel._evaluate_clamped(self.distances)
        loop_kernel = None
        if cfg.loops:
            loop_kernel = kernel._evaluate_clamped(self.loop_distances)
            np.fill_diagonal(K, loop_kernel)
        else:
            np.fill_diagonal(K, 0.0)
        x_out, x_in, resid, iters = fit_weights(
            self.set.w_prime_out, self.set.w_prime_in, K, self.graph.directed,
            tol=cfg.fit_tol, max_iter=cfg.fit_max_iter, damping=cfg.damping)
        if self.graph.directed:
            x_out, x_in = _gauge_fix(x_out, x_in)
        m = GclModel(kernel=kernel, directed=self.graph.directed,
                     x_out=x_out, x_in=x_in, fit_residual=resid, iterations=iters,
                     distances=self.distances, loop_kernel=loop_kernel)
        self._models[key] = m
        return m

    def inherited_out(self, nodes: np.ndarray, model: GclModel) -> np.ndarray:
        """Member share of the landmark out-weight; 0 on a zero-strength side."""
        lm = self.set.member_of[nodes]
        denom = self.set.w_prime_out[lm]
        share = np.divide(self.graph.w_out[nodes], denom,
                          out=np.zeros(nodes.shape[0]), where=denom > 0)
        return model.x_out[lm] * share

    def inherited_in(self, nodes: np.ndarray, model: GclModel) -> np.ndarray:
        lm = self.set.member_of[nodes]
        denom = self.set.w_prime_in[lm]
        share = np.divide(self.graph.w_in[nodes], denom,
                          out=np.zeros(nodes.shape[0]), where=denom > 0)
        return model.x_in[lm] * share


def _prepare(graph, embedding, partition, config) -> tuple[LandmarkSet, LandmarkModels]:
    count = config.resolve_count(graph.n, partition.n_communities)
    lset = refine_partition(graph, embedding, partition, count,
                            seed=config.seed, split_factor=config.split_factor)
    return lset, LandmarkModels(graph, lset, config)


def approx_global_score(graph: Graph, embedding: Embedding, partition: Partition,
                        config: LandmarkConfig | None = None,
                        opts: SearchOptions | None = None,
                        *, models: LandmarkModels | None = None) -> GlobalScoreResult:
    """Density-based score with the model fitted on landmarks.

    Landmark self-loop mass counts as internal mass of the landmark's
    community; the observed block masses come from the full graph.
    """
    config = config or LandmarkConfig()
    opts = opts or SearchOptions()
    if models is None:
        _, models = _prepare(graph, embedding, partition, config)
    c = graph_density_vector(graph, partition)
    ell = partition.n_communities
    community_of = models.set.community_of

    def evaluate(alpha: float) -> float:
        model = models.model(alpha)
        p = model.probability_matrix(clamp=True)
        mass = block_mass_matrix(p, community_of, ell, graph.directed,
                                 count_diagonal=model.has_loops)
        total = mass.sum()
        if total <= 0:
            raise ValueError("landmark model assigns zero total edge mass")
        b = flatten_block_matrix(mass / total, graph.directed)
        if opts.split_jsd:
            return split_divergence(c, b, ell, graph.directed)
        return jsd(c, b)

    best, best_alpha, curve, failures = alpha_grid_search(evaluate, opts)
    return GlobalScoreResult(best, best_alpha, curve, failures)


def approx_local_score(graph: Graph, embedding: Embedding, partition: Partition,
                       config: LandmarkConfig | None = None,
                       opts: SearchOptions | None = None, seed: int = 0,
                       *, models: LandmarkModels | None = None,
                       weighted: bool | None = None) -> LocalScoreResult:
    """Link-based score using landmark weights split among members.

    Sampled pairs keep their true embedding distance (clamped into the
    landmark kernel domain); only the weights come from the landmark fit.
    """
    config = config or LandmarkConfig()
    opts = opts or SearchOptions()
    if weighted is None:
        weighted = graph.weighted
    if models is None:
        _, models = _prepare(graph, embedding, partition, config)
    sample = sample_pairs(graph, opts.auc_samples, seed)
    coords = embedding.coords
    d_pos = np.clip(pair_distance(coords[sample.pos_src], coords[sample.pos_dst],
                                  config.metric), models.d_min, models.d_max)
    d_neg = np.clip(pair_distance(coords[sample.neg_src], coords[sample.neg_dst],
                                  config.metric), models.d_min, models.d_max)
    by_alpha: dict[float, tuple[float, float]] = {}

    def evaluate(alpha: float) -> float:
        model = models.model(alpha)
        g_pos = model.kernel._evaluate_clamped(d_pos)
        g_neg = model.kernel._evaluate_clamped(d_neg)
        p_pos = models.inherited_out(sample.pos_src, model) * \
            models.inherited_in(sample.pos_dst, model) * g_pos
        p_neg = models.inherited_out(sample.neg_src, model) * \
            models.inherited_in(sample.neg_dst, model) * g_neg
        p_hat, ci = auc_from_probabilities(
            p_pos, p_neg, sample.pos_weight if weighted else None)
        by_alpha[alpha] = (p_hat, ci)
        return 1.0 - p_hat

    best, best_alpha, curve, failures = alpha_grid_search(evaluate, opts)
    auc_curve = [(a, 1.0 - d) for a, d in curve]
    return LocalScoreResult(best, best_alpha, by_alpha[best_alpha][1],
                            auc_curve, failures)
