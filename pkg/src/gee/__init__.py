"""Unsupervised quality scores for graph node embeddings.

The package fits a geometric Chung-Lu null model to (graph, embedding)
pairs and derives two scores: a density-based one comparing observed and
expected community edge masses and a link-based one measuring how well the
model's pair probabilities predict edges.  A landmark coarsening makes
both affordable on large graphs.
"""

from .clustering import ecg, louvain, modularity
from .gcl import (
    DistanceKernel,
    FitNonConvergenceError,
    GclModel,
    ModelCache,
    check_feasibility,
    distance_extremes,
    expected_block_mass,
    fit,
    kernel_eval,
)
from .graph_io import (
    Embedding,
    Graph,
    GraphFormatError,
    Partition,
    load_embedding,
    load_graph,
    load_partition,
    write_embedding,
    write_graph,
    write_partition,
)
from .landmarks import (
    LandmarkConfig,
    LandmarkSet,
    approx_global_score,
    approx_local_score,
    default_landmark_count,
    refine_partition,
)
from .scoring_global import (
    GlobalScoreResult,
    SearchOptions,
    global_score,
    graph_density_vector,
    jsd,
    model_density_vector,
)
from .scoring_local import (
    LocalScoreResult,
    PairSample,
    auc_estimate,
    local_score,
    sample_pairs,
)
from .synth import gen_embedding, gen_sbm, rescale_communities, rewire_within
from .cli import combine, evaluate

__version__ = "0.1.0"

__all__ = [
    "DistanceKernel", "Embedding", "FitNonConvergenceError", "GclModel",
    "GlobalScoreResult", "Graph", "GraphFormatError", "LandmarkConfig",
    "LandmarkSet", "LocalScoreResult", "ModelCache", "PairSample", "Partition",
    "SearchOptions", "approx_global_score", "approx_local_score",
    "auc_estimate", "check_feasibility", "combine", "default_landmark_count",
    "distance_extremes", "ecg", "evaluate", "expected_block_mass", "fit",
    "gen_embedding", "gen_sbm", "global_score", "graph_density_vector", "jsd",
    "kernel_eval", "load_embedding", "load_graph", "load_partition",
    "local_score", "louvain", "model_density_vector", "modularity",
    "refine_partition", "rescale_communities", "rewire_within", "sample_pairs",
    "write_embedding", "write_graph", "write_partition",
]
