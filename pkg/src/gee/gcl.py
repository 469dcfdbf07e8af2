"""Geometric Chung-Lu null model.

Given a graph's in/out strength vectors and node coordinates, the model
assigns every ordered node pair an edge probability

    p[i, j] = x_out[i] * x_in[j] * g(d[i, j])

where ``g`` is a decreasing kernel of the embedding distance and the
weights ``x_out``, ``x_in`` are tuned so that every node's expected out-
and in-strength matches the graph.  The weight system has a unique
solution (up to a gauge rescaling of the two weight vectors) unless the
graph is a two-node graph or a star whose centre sits on every edge; those
cases are detected up front and reconstructed deterministically instead of
fitted.

For undirected graphs a single weight vector is fitted against the total
strength, halving the work.  The self-loop variant (a positive kernel
value on the diagonal, with per-node loop "distances") is used by the
landmark approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .graph_io import Embedding, Graph, Partition

_METRICS = {"l2": "euclidean", "l1": "cityblock", "linf": "chebyshev"}

# Relative slack when validating that a distance lies in the kernel domain,
# and the relative gap below which two model probabilities count as tied.
RANGE_SLACK = 1e-9

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 2000
DEFAULT_DAMPING = 0.8


class FitNonConvergenceError(RuntimeError):
    """Weight fitting did not reach the target residual within max_iter."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def pairwise_distances(coords: np.ndarray, metric: str = "l2") -> np.ndarray:
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(_METRICS)}")
    return cdist(coords, coords, metric=_METRICS[metric])


def pair_distance(a: np.ndarray, b: np.ndarray, metric: str = "l2") -> np.ndarray:
    """Row-wise distance between two coordinate arrays."""
    diff = np.atleast_2d(a) - np.atleast_2d(b)
    if metric == "l2":
        return np.sqrt((diff * diff).sum(axis=1))
    if metric == "l1":
        return np.abs(diff).sum(axis=1)
    if metric == "linf":
        return np.abs(diff).max(axis=1)
    raise ValueError(f"unknown metric {metric!r}")


def distance_extremes(embedding: Embedding | np.ndarray, metric: str = "l2") -> tuple[float, float]:
    """Exact min (over distinct index pairs) and max pairwise distance.

    Coincident points contribute a minimum of 0.  An embedding where every
    pairwise distance is 0 is rejected.  A degenerate geometry where all
    pairwise distances are equal but positive is allowed; the kernel then
    treats every pair identically.
    """
    coords = embedding.coords if isinstance(embedding, Embedding) else np.asarray(embedding)
    d = pairwise_distances(coords, metric)
    off = ~np.eye(coords.shape[0], dtype=bool)
    d_min = float(d[off].min())
    d_max = float(d[off].max())
    if d_max == 0.0:
        raise ValueError("all embedding points coincide; distances carry no information")
    return d_min, d_max


@dataclass(frozen=True)
class DistanceKernel:
    """Normalized decreasing kernel ((d_max - d) / (d_max - d_min)) ** alpha.

    ``alpha == 0`` makes the kernel identically 1 (0**0 := 1 at d_max), so
    pairwise distances are neglected.  The optional ``clip`` pair (lo, hi)
    is applied to the normalized distance, which keeps the kernel away from
    the exact values 1 and 0 for pathological embeddings.  When
    d_max == d_min the kernel is identically 1 for any alpha.
    """

    alpha: float
    d_min: float
    d_max: float
    clip: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.d_max < self.d_min:
            raise ValueError("d_max must be >= d_min")
        if self.clip is not None:
            lo, hi = self.clip
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError("clip bounds must satisfy 0 <= lo < hi <= 1")

    def _slack(self) -> float:
        return RANGE_SLACK * max(1.0, abs(self.d_max))

    def evaluate(self, d) -> np.ndarray | float:
        """Kernel value for distances inside [d_min, d_max] (validated)."""
        arr = np.asarray(d, dtype=np.float64)
        slack = self._slack()
        if np.any(arr < self.d_min - slack) or np.any(arr > self.d_max + slack):
            raise ValueError(
                f"distance outside kernel range [{self.d_min}, {self.d_max}]")
        out = self._evaluate_clamped(arr)
        return float(out) if np.isscalar(d) or arr.ndim == 0 else out

    def _evaluate_clamped(self, arr: np.ndarray) -> np.ndarray:
        """Kernel value with distances clamped into the domain (no check)."""
        span = self.d_max - self.d_min
        if span <= self._slack():
            # (near-)equidistant geometry: distances carry no information,
            # so every pair gets the same kernel value
            return np.ones_like(arr)
        t = np.clip((arr - self.d_min) / span, 0.0, 1.0)
        if self.clip is not None:
            t = np.clip(t, self.clip[0], self.clip[1])
        return np.power(1.0 - t, self.alpha)


def kernel_eval(kernel: DistanceKernel, d) -> np.ndarray | float:
    return kernel.evaluate(d)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    kind: str | None = None  # "star" | "two_nodes" when degenerate
    center: int | None = None

    @property
    def degenerate(self) -> bool:
        return not self.feasible


def check_feasibility(graph: Graph) -> FeasibilityReport:
    """Classify a graph as feasible or degenerate for weight fitting.

    The unique-solution conditions require, for every node j, that the total
    in-strength and the total out-strength each exceed w_out[j] + w_in[j].
    They fail exactly for two-node graphs and stars where one node sits on
    every edge.
    """
    if graph.n == 2:
        return FeasibilityReport(False, "two_nodes")
    incident = np.bincount(graph.src, minlength=graph.n)
    incident += np.bincount(graph.dst, minlength=graph.n)
    on_all = np.flatnonzero(incident == graph.m)
    if on_all.size > 0:
        return FeasibilityReport(False, "star", int(on_all[0]))
    node_mass = graph.w_out + graph.w_in
    if graph.w_in.sum() <= node_mass.max() or graph.w_out.sum() <= node_mass.max():
        center = int(np.argmax(node_mass))
        return FeasibilityReport(False, "star", center)
    return FeasibilityReport(True)


@dataclass
class GclModel:
    """A fitted (or deterministically reconstructed) null model.

    ``deterministic_p`` is set for degenerate graphs (two-node, star) whose
    edge probabilities are forced by the degree constraints; no weights are
    fitted then.  ``distances`` is a read-only reference to the pairwise
    distance matrix used by the fit, kept so block masses and pair
    probabilities can be evaluated later.
    """

    kernel: DistanceKernel
    directed: bool
    x_out: np.ndarray | None = None
    x_in: np.ndarray | None = None
    degenerate: bool = False
    deterministic_p: np.ndarray | None = None
    fit_residual: float = 0.0
    iterations: int = 0
    overshoot_count: int = 0  # ordered pairs whose raw probability exceeds 1
    distances: np.ndarray | None = None
    loop_kernel: np.ndarray | None = None  # diagonal kernel values, loops variant

    @property
    def n(self) -> int:
        if self.deterministic_p is not None:
            return self.deterministic_p.shape[0]
        return self.x_out.shape[0]

    @property
    def has_loops(self) -> bool:
        return self.loop_kernel is not None

    def probability_matrix(self, clamp: bool = True) -> np.ndarray:
        """Full pairwise probability matrix; diagonal is 0 unless loops."""
        if self.deterministic_p is not None:
            return self.deterministic_p.copy()
        if self.distances is None:
            raise ValueError("model carries no distance matrix")
        p = np.outer(self.x_out, self.x_in) * self.kernel._evaluate_clamped(self.distances)
        if self.loop_kernel is not None:
            np.fill_diagonal(p, self.x_out * self.x_in * self.loop_kernel)
        else:
            np.fill_diagonal(p, 0.0)
        if clamp:
            np.clip(p, None, 1.0, out=p)
        return p

    def pair_probability(self, i, j, distances: np.ndarray | None = None) -> np.ndarray:
        """Raw model probability for ordered index pairs (unclamped).

        ``distances`` overrides the per-pair distances (used in landmark
        mode where node distances are not the fitted system's distances).
        """
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if self.deterministic_p is not None:
            return self.deterministic_p[i, j]
        if distances is None:
            if self.distances is None:
                raise ValueError("model carries no distance matrix")
            distances = self.distances[i, j]
        g = self.kernel._evaluate_clamped(np.asarray(distances, dtype=np.float64))
        return self.x_out[i] * self.x_in[j] * g


def fit_weights(
    w_out: np.ndarray,
    w_in: np.ndarray,
    kernel_matrix: np.ndarray,
    directed: bool,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = DEFAULT_DAMPING,
    x0: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Solve the expected-strength system by damped alternating sweeps.

    ``kernel_matrix`` must carry the kernel value for every ordered pair,
    with the diagonal already set (0 without self-loops).  Nodes with zero
    strength on a side get weight 0 on that side.  Returns
    (x_out, x_in, residual, iterations); for undirected systems both
    returned vectors are the same array.
    """
    w_out = np.asarray(w_out, dtype=np.float64)
    w_in = np.asarray(w_in, dtype=np.float64)
    K = kernel_matrix
    total = w_out.sum()
    if total <= 0:
        raise ValueError("graph has no edge mass")
    out_pos = w_out > 0
    in_pos = w_in > 0
    if x0 is not None:
        x_out = np.where(out_pos, np.asarray(x0[0], dtype=np.float64), 0.0)
        x_in = np.where(in_pos, np.asarray(x0[1], dtype=np.float64), 0.0)
    else:
        x_out = w_out / np.sqrt(total)
        x_in = w_in / np.sqrt(total)
    with np.errstate(over="ignore", invalid="ignore"):
        if not directed:
            x = x_out
            for it in range(1, max_iter + 1):
                s = K @ x
                resid = _degree_residual(x * s, w_out)
                if resid <= tol:
                    return x, x, resid, it - 1
                if not np.isfinite(resid):
                    raise FitNonConvergenceError(
                        "iteration diverged; the strength vector sits at or "
                        "beyond the solvability boundary", resid, it - 1)
                if np.any((s <= 0) & out_pos):
                    raise FitNonConvergenceError(
                        "zero expected strength for a positive-strength node; "
                        "the system is infeasible or sits on the kernel's zero boundary",
                        resid, it - 1)
                x = np.where(out_pos,
                             (1.0 - damping) * x + damping * w_out / np.where(s > 0, s, 1.0),
                             0.0)
            resid = _degree_residual(x * (K @ x), w_out)
            if resid <= tol:
                return x, x, resid, max_iter
            raise FitNonConvergenceError(
                f"no convergence after {max_iter} iterations (residual {resid:.3e}); "
                "the strength vector may be close to the solvability boundary",
                resid, max_iter)
        for it in range(1, max_iter + 1):
            s_out = K @ x_in
            r_out = _degree_residual(x_out * s_out, w_out)
            if np.any((s_out <= 0) & out_pos):
                raise FitNonConvergenceError(
                    "zero expected out-strength for a positive-strength node",
                    r_out, it - 1)
            x_out = np.where(out_pos,
                             (1.0 - damping) * x_out + damping * w_out / np.where(s_out > 0, s_out, 1.0),
                             0.0)
            s_in = K.T @ x_out
            r_in = _degree_residual(x_in * s_in, w_in)
            if np.any((s_in <= 0) & in_pos):
                raise FitNonConvergenceError(
                    "zero expected in-strength for a positive-strength node",
                    r_in, it - 1)
            x_in = np.where(in_pos,
                            (1.0 - damping) * x_in + damping * w_in / np.where(s_in > 0, s_in, 1.0),
                            0.0)
            if not (np.isfinite(r_out) and np.isfinite(r_in)):
                raise FitNonConvergenceError(
                    "iteration diverged; the strength vector sits at or beyond "
                    "the solvability boundary", max(r_out, r_in), it)
            if max(r_out, r_in) <= 0.1 * tol:
                resid = max(_degree_residual(x_out * (K @ x_in), w_out),
                            _degree_residual(x_in * (K.T @ x_out), w_in))
                if resid <= tol:
                    return x_out, x_in, resid, it
        resid = max(_degree_residual(x_out * (K @ x_in), w_out),
                    _degree_residual(x_in * (K.T @ x_out), w_in))
        if resid <= tol:
            return x_out, x_in, resid, max_iter
        raise FitNonConvergenceError(
            f"no convergence after {max_iter} iterations (residual {resid:.3e}); "
            "the strength vector may be close to the solvability boundary",
            resid, max_iter)


def _degree_residual(expected: np.ndarray, target: np.ndarray) -> float:
    return float(np.max(np.abs(expected - target) / np.maximum(target, 1.0)))


def _gauge_fix(x_out: np.ndarray, x_in: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale so the first strictly positive out-weight equals 1."""
    pos = np.flatnonzero(x_out > 0)
    if pos.size == 0:
        return x_out, x_in
    c = x_out[pos[0]]
    return x_out / c, x_in * c


def _deterministic_model(graph: Graph, kernel: DistanceKernel,
                         distances: np.ndarray | None) -> GclModel:
    """Degenerate graphs are reconstructed exactly: p equals the adjacency."""
    p = np.zeros((graph.n, graph.n))
    p[graph.src, graph.dst] = graph.weight
    if not graph.directed:
        p[graph.dst, graph.src] = graph.weight
    return GclModel(kernel=kernel, directed=graph.directed, degenerate=True,
                    deterministic_p=p, distances=distances)


def _count_overshoot(x_out, x_in, K, has_loops: bool) -> int:
    p = np.outer(x_out, x_in) * K
    if not has_loops:
        np.fill_diagonal(p, 0.0)
    return int(np.count_nonzero(p > 1.0))


def fit(
    graph: Graph,
    embedding: Embedding,
    alpha: float,
    allow_loops: bool = False,
    loop_distances: np.ndarray | None = None,
    *,
    metric: str = "l2",
    clip: tuple[float, float] | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = DEFAULT_DAMPING,
    x0: tuple[np.ndarray, np.ndarray] | None = None,
    extremes: tuple[float, float] | None = None,
) -> GclModel:
    """Fit the null model for one kernel exponent.

    Degenerate graphs (two-node, star) skip the iterative solve and return
    the deterministic reconstruction.  ``allow_loops`` with per-node
    ``loop_distances`` enables the self-loop variant; loop distances are
    clamped into the kernel domain.
    """
    if embedding.n != graph.n:
        raise ValueError(f"embedding has {embedding.n} rows for a {graph.n}-node graph")
    D = pairwise_distances(embedding.coords, metric)
    if extremes is None:
        d_min, d_max = distance_extremes(embedding, metric)
    else:
        d_min, d_max = extremes
    kernel = DistanceKernel(alpha, d_min, d_max, clip)
    feas = check_feasibility(graph)
    if feas.degenerate and not allow_loops:
        return _deterministic_model(graph, kernel, D)
    K = kernel._evaluate_clamped(D)
    loop_kernel = None
    if allow_loops:
        if loop_distances is None:
            raise ValueError("allow_loops requires loop_distances")
        loop_kernel = kernel._evaluate_clamped(
            np.asarray(loop_distances, dtype=np.float64))
        np.fill_diagonal(K, loop_kernel)
    else:
        np.fill_diagonal(K, 0.0)
    x_out, x_in, resid, iters = fit_weights(
        graph.w_out, graph.w_in, K, graph.directed,
        tol=tol, max_iter=max_iter, damping=damping, x0=x0)
    if graph.directed:
        x_out, x_in = _gauge_fix(x_out, x_in)
    overshoot = _count_overshoot(x_out, x_in, K, allow_loops)
    return GclModel(kernel=kernel, directed=graph.directed, x_out=x_out, x_in=x_in,
                    fit_residual=resid, iterations=iters, overshoot_count=overshoot,
                    distances=D, loop_kernel=loop_kernel)


def block_mass_matrix(p: np.ndarray, labels: np.ndarray, n_blocks: int,
                      directed: bool, count_diagonal: bool = False) -> np.ndarray:
    """Aggregate a pairwise mass matrix into block totals.

    For undirected systems the result is upper triangular: each unordered
    pair of blocks (and each within-block mass) appears once.
    ``count_diagonal`` adds p[i, i] self-loop mass to the block diagonal.
    """
    ell = n_blocks
    pair_index = labels[:, None] * ell + labels[None, :]
    work = p.copy()
    if not count_diagonal:
        np.fill_diagonal(work, 0.0)
    flat = np.bincount(pair_index.ravel(), weights=work.ravel(), minlength=ell * ell)
    mass = flat.reshape(ell, ell)
    if count_diagonal:
        # self-loop mass belongs on the block diagonal; subtract and re-add
        # to keep it out of the symmetrization below
        loop_mass = np.bincount(labels, weights=np.diagonal(p), minlength=ell)
        mass[np.diag_indices(ell)] -= loop_mass
    if not directed:
        # the ordered aggregation visits each unordered node pair once per
        # orientation slot: mass[a, b] already holds the unordered cross
        # mass for a != b, and mass[a, a] holds twice the within mass
        sym = (mass + mass.T) / 2.0
        upper = np.triu(sym, 1)
        upper[np.diag_indices(ell)] = np.diagonal(mass) / 2.0
        mass = upper
    if count_diagonal:
        mass[np.diag_indices(ell)] += loop_mass
    return mass


def expected_block_mass(model: GclModel, graph: Graph, partition: Partition) -> np.ndarray:
    """Expected edge-mass proportions between and within communities.

    Probabilities above 1 are clamped before aggregation.  The returned
    ell x ell matrix sums to 1; for undirected graphs it is upper
    triangular (one entry per unordered block pair).
    """
    if partition.assign.shape[0] != graph.n:
        raise ValueError("partition does not match the graph")
    p = model.probability_matrix(clamp=True)
    mass = block_mass_matrix(p, partition.assign, partition.n_communities,
                             graph.directed, count_diagonal=model.has_loops)
    total = mass.sum()
    if total <= 0:
        raise ValueError("model assigns zero total edge mass")
    return mass / total


class ModelCache:
    """Per-(graph, embedding) fit cache across kernel exponents.

    Precomputes the distance matrix and extremes once; ``model(alpha)``
    memoizes fitted models so the density and link scores can share them.
    """

    def __init__(self, graph: Graph, embedding: Embedding, *,
                 metric: str = "l2", clip: tuple[float, float] | None = None,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 damping: float = DEFAULT_DAMPING):
        if embedding.n != graph.n:
            raise ValueError(f"embedding has {embedding.n} rows for a {graph.n}-node graph")
        self.graph = graph
        self.embedding = embedding
        self.metric = metric
        self.clip = clip
        self.tol = tol
        self.max_iter = max_iter
        self.damping = damping
        self.distances = pairwise_distances(embedding.coords, metric)
        off = ~np.eye(graph.n, dtype=bool)
        self.extremes = (float(self.distances[off].min()), float(self.distances[off].max()))
        if self.extremes[1] == 0.0:
            raise ValueError("all embedding points coincide; distances carry no information")
        self.feasibility = check_feasibility(graph)
        self._models: dict[float, GclModel] = {}

    def model(self, alpha: float) -> GclModel:
        key = float(alpha)
        if key in self._models:
            return self._models[key]
        kernel = DistanceKernel(key, *self.extremes, self.clip)
        if self.feasibility.degenerate:
            m = _deterministic_model(self.graph, kernel, self.distances)
        else:
            K = kernel._evaluate_clamped(self.distances)
            np.fill_diagonal(K, 0.0)
            x_out, x_in, resid, iters = fit_weights(
                self.graph.w_out, self.graph.w_in, K, self.graph.directed,
                tol=self.tol, max_iter=self.max_iter, damping=self.damping)
            if self.graph.directed:
                x_out, x_in = _gauge_fix(x_out, x_in)
            overshoot = _count_overshoot(x_out, x_in, K, False)
            m = GclModel(kernel=kernel, directed=self.graph.directed,
                         x_out=x_out, x_in=x_in, fit_residual=resid,
                         iterations=iters, overshoot_count=overshoot,
                         distances=self.distances)
        self._models[key] = m
        return m
