"""Command-line interface: batch embedding scoring and synthetic data.

``gee score`` loads one graph and any number of embeddings, runs one
clustering pass (unless a partition file is given), scores every embedding
with the density-based and link-based measures, ranks them by the combined
score, and emits a JSON report (optionally also CSV).  ``gee synth``
writes planted-partition graphs, partitions, and embeddings in the text
formats the scorer reads.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .clustering import ecg, louvain
from .gcl import FitNonConvergenceError, ModelCache
from .graph_io import (
    GraphFormatError,
    load_embedding,
    load_graph,
    load_partition,
    write_embedding,
    write_graph,
    write_partition,
)
from .landmarks import (
    LANDMARK_NODE_THRESHOLD,
    LandmarkConfig,
    LandmarkModels,
    approx_global_score,
    approx_local_score,
    refine_partition,
)
from .scoring_global import SearchOptions, global_score
from .scoring_local import local_score
from .synth import gen_embedding, gen_sbm

REPORT_SCHEMA = 1
DEFAULT_Q = 0.5
DEFAULT_EPS = 0.01


def combine(global_scores, local_scores, q: float = DEFAULT_Q,
            eps: float = DEFAULT_EPS) -> np.ndarray:
    """Min-normalized convex combination of the two score vectors.

    Every value is at least 1; a value of exactly 1 means the embedding is
    undominated in both criteria within the batch.
    """
    g = np.asarray(global_scores, dtype=np.float64)
    l = np.asarray(local_scores, dtype=np.float64)
    if g.shape != l.shape or g.ndim != 1 or g.shape[0] < 1:
        raise ValueError("score vectors must be 1-d, non-empty, equal length")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not (0.0 <= q <= 1.0):
        raise ValueError("q must lie in [0, 1]")
    rg = (g + eps) / (g + eps).min()
    rl = (l + eps) / (l + eps).min()
    return q * rg + (1.0 - q) * rl


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _score_one(graph, partition, path, index, *, seed, sample_seed,
               use_landmarks, n_landmarks, split_factor, opts, metric, clip,
               fit_tol, fit_max_iter, weighted) -> dict:
    # the pair sample is a property of the graph alone and is shared by the
    # whole batch, so identical embedding files get identical scores; only
    # the embedding-dependent landmark refinement gets a per-embedding seed
    embedding = load_embedding(path, graph)
    record: dict = {
        "name": Path(path).name,
        "path": str(path),
        "dimension": embedding.k,
        "mode": "landmark" if use_landmarks else "exact",
    }
    if use_landmarks:
        config = LandmarkConfig(n_landmarks=n_landmarks, split_factor=split_factor,
                                seed=_derived_seed(seed, 3, index), metric=metric,
                                clip=clip, fit_tol=fit_tol, fit_max_iter=fit_max_iter)
        count = config.resolve_count(graph.n, partition.n_communities)
        lset = refine_partition(graph, embedding, partition, count,
                                seed=config.seed, split_factor=config.split_factor)
        models = LandmarkModels(graph, lset, config)
        g = approx_global_score(graph, embedding, partition, config, opts, models=models)
        loc = approx_local_score(graph, embedding, partition, config, opts,
                                 seed=sample_seed, models=models, weighted=weighted)
        record["landmarks"] = lset.n_prime
        fitted = models._models.values()
    else:
        cache = ModelCache(graph, embedding, metric=metric, clip=clip,
                           tol=fit_tol, max_iter=fit_max_iter)
        g = global_score(graph, embedding, partition, opts, cache=cache)
        loc = local_score(graph, embedding, opts, seed=sample_seed, cache=cache,
                          weighted=weighted)
        fitted = cache._models.values()
    record["global"] = {
        "score": g.score,
        "alpha": g.best_alpha,
        "curve": [[a, v] for a, v in g.curve],
        "fit_failures": len(g.failures),
    }
    record["local"] = {
        "score": loc.score,
        "alpha": loc.best_alpha,
        "auc": 1.0 - loc.score,
        "ci_halfwidth": loc.ci_halfwidth,
        "curve": [[a, v] for a, v in loc.curve],
        "fit_failures": len(loc.failures),
    }
    record["diagnostics"] = {
        "sample_seed": sample_seed,
        "p_over_one_pairs_max": max((m.overshoot_count for m in fitted), default=0),
        "fit_residual_max": max((m.fit_residual for m in fitted), default=0.0),
    }
    return record


def evaluate(graph_path, embedding_paths, *, directed=False, weighted=None,
             partition_path=None, clusterer=None, q=DEFAULT_Q, eps=DEFAULT_EPS,
             seed=0, landmarks=None, force_exact=False, split_factor=4,
             alpha_step=0.25, alpha_max=32.0, auc_samples=10000,
             split_jsd=False, metric="l2", clip=None, fit_tol=1e-8,
             fit_max_iter=2000, threads=None) -> dict:
    """Score a batch of embeddings of one graph; returns the report dict.

    Clustering runs once and is shared by every embedding.  Per-embedding
    failures are recorded in the report without aborting the batch.
    """
    if not embedding_paths:
        raise ValueError("need at least one embedding")
    graph = load_graph(graph_path, directed=directed)
    if weighted is None:
        weighted = graph.weighted
    if partition_path is not None:
        partition = load_partition(partition_path, graph)
        partition_source = "file"
    else:
        method = clusterer or ("louvain" if graph.weighted else "ecg")
        cluster_seed = _derived_seed(seed, 1)
        if method == "ecg":
            partition = ecg(graph, seed=cluster_seed)
        elif method == "louvain":
            partition = louvain(graph, seed=cluster_seed)
        else:
            raise ValueError(f"unknown clusterer {method!r}")
        partition_source = method
        if partition.n_communities < 2:
            raise ValueError(
                "clustering found a single community; supply a partition file")
    use_landmarks = (landmarks is not None) or (graph.n >= LANDMARK_NODE_THRESHOLD)
    if force_exact:
        use_landmarks = False
    opts = SearchOptions(alpha_step=alpha_step, alpha_max=alpha_max,
                         split_jsd=split_jsd, auc_samples=auc_samples)
    sample_seed = _derived_seed(seed, 2)

    def worker(args):
        index, path = args
        try:
            return _score_one(graph, partition, path, index, seed=seed,
                              sample_seed=sample_seed,
                              use_landmarks=use_landmarks, n_landmarks=landmarks,
                              split_factor=split_factor, opts=opts, metric=metric,
                              clip=clip, fit_tol=fit_tol, fit_max_iter=fit_max_iter,
                              weighted=weighted)
        except (GraphFormatError, FitNonConvergenceError, ValueError) as exc:
            return {"name": Path(path).name, "path": str(path), "error": str(exc)}

    jobs = list(enumerate(embedding_paths))
    max_workers = threads or min(len(jobs), os.cpu_count() or 1)
    cap = os.environ.get("GEE_THREADS")
    if cap:
        max_workers = max(1, min(max_workers, int(cap)))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(worker, jobs))
    else:
        records = [worker(j) for j in jobs]

    scored = [r for r in records if "error" not in r]
    if scored:
        combined = combine([r["global"]["score"] for r in scored],
                           [r["local"]["score"] for r in scored], q=q, eps=eps)
        g = np.asarray([r["global"]["score"] for r in scored])
        l = np.asarray([r["local"]["score"] for r in scored])
        ng = (g + eps) / (g + eps).min()
        nl = (l + eps) / (l + eps).min()
        for r, cg, cl, cv in zip(scored, ng, nl, combined):
            r["normalized_global"] = float(cg)
            r["normalized_local"] = float(cl)
            r["combined"] = float(cv)
        winner = min(scored, key=lambda r: (r["combined"], r["name"]))["name"]
    else:
        winner = None
    return {
        "schema": REPORT_SCHEMA,
        "graph": {"path": str(graph_path), "nodes": graph.n, "edges": graph.m,
                  "directed": graph.directed, "weighted": weighted},
        "partition": {"source": partition_source,
                      "communities": partition.n_communities},
        "options": {"seed": seed, "q": q, "eps": eps, "alpha_step": alpha_step,
                    "alpha_max": alpha_max, "patience": 5, "jsd_base": 2,
                    "auc_samples": auc_samples, "split_jsd": split_jsd,
                    "metric": metric, "clip": list(clip) if clip else None,
                    "fit_tol": fit_tol, "fit_max_iter": fit_max_iter,
                    "shared_pair_sample": True,
                    "landmark_threshold": LANDMARK_NODE_THRESHOLD},
        "embeddings": records,
        "winner": winner,
    }


def _write_csv(report: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "global", "local", "combined"])
        for r in report["embeddings"]:
            if "error" in r:
                writer.writerow([r["name"], "", "", ""])
            else:
                writer.writerow([r["name"], r["global"]["score"],
                                 r["local"]["score"], r.get("combined", "")])


def _parse_clip(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("clip must be 'lo,hi'") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gee", description="Unsupervised quality scores for graph embeddings")
    sub = parser.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("score", help="score one or more embeddings of a graph")
    sc.add_argument("-g", "--graph", required=True)
    sc.add_argument("-e", "--embedding", action="append", required=True,
                    help="embedding file; repeat for a batch")
    sc.add_argument("-c", "--communities", default=None,
                    help="partition file; skips clustering")
    sc.add_argument("-d", "--directed", action="store_true")
    sc.add_argument("-w", "--weighted", action="store_true",
                    help="force weighted handling (auto-detected otherwise)")
    sc.add_argument("--clusterer", choices=["louvain", "ecg"], default=None)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("-q", type=float, default=DEFAULT_Q,
                    help="weight of the global score in the combined score")
    sc.add_argument("--eps", type=float, default=DEFAULT_EPS)
    sc.add_argument("--landmarks", type=int, default=None,
                    help="force landmark mode with this many landmarks")
    sc.add_argument("--force-exact", action="store_true")
    sc.add_argument("--split-factor", type=int, default=4)
    sc.add_argument("--alpha-step", type=float, default=0.25)
    sc.add_argument("--alpha-max", type=float, default=32.0)
    sc.add_argument("--auc-samples", type=int, default=10000)
    sc.add_argument("--split-jsd", action="store_true")
    sc.add_argument("--metric", choices=["l2", "l1", "linf"], default="l2")
    sc.add_argument("--clip", type=_parse_clip, default=None,
                    help="normalized-distance clip bounds 'lo,hi'")
    sc.add_argument("--fit-tol", type=float, default=1e-8)
    sc.add_argument("--fit-max-iter", type=int, default=2000)
    sc.add_argument("--threads", type=int, default=None)
    sc.add_argument("-o", "--output", default=None, help="report JSON path (default stdout)")
    sc.add_argument("--csv", default=None, help="also write a CSV summary")

    sy = sub.add_parser("synth", help="generate a planted-partition benchmark")
    sy.add_argument("--nodes", type=int, required=True)
    sy.add_argument("--blocks", type=int, required=True)
    sy.add_argument("--p-in", type=float, required=True)
    sy.add_argument("--p-out", type=float, required=True)
    sy.add_argument("--directed", action="store_true")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--out-graph", required=True)
    sy.add_argument("--out-partition", default=None)
    sy.add_argument("--out-embedding", default=None)
    sy.add_argument("--dim", type=int, default=2)
    sy.add_argument("--spread", type=float, default=1.0)
    sy.add_argument("--noise", type=float, default=0.1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        graph, partition = gen_sbm(args.nodes, args.blocks, args.p_in, args.p_out,
                                   directed=args.directed, seed=args.seed)
        write_graph(graph, args.out_graph)
        if args.out_partition:
            write_partition(partition, args.out_partition)
        if args.out_embedding:
            embedding = gen_embedding(partition, args.dim, args.spread,
                                      args.noise, seed=args.seed)
            write_embedding(embedding, args.out_embedding)
        return 0
    try:
        report = evaluate(
            args.graph, args.embedding, directed=args.directed,
            weighted=True if args.weighted else None,
            partition_path=args.communities, clusterer=args.clusterer,
            q=args.q, eps=args.eps, seed=args.seed, landmarks=args.landmarks,
            force_exact=args.force_exact, split_factor=args.split_factor,
            alpha_step=args.alpha_step, alpha_max=args.alpha_max,
            auc_samples=args.auc_samples, split_jsd=args.split_jsd,
            metric=args.metric, clip=args.clip, fit_tol=args.fit_tol,
            fit_max_iter=args.fit_max_iter, threads=args.threads)
    except (GraphFormatError, ValueError, OSError) as exc:
        print(f"gee: error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.csv:
        _write_csv(report, args.csv)
    return 0 if report["winner"] is not None else 2


def entry() -> None:
    sys.exit(main())
