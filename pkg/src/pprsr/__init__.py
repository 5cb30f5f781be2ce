"""Personalized PageRank and successor representations on finite graphs."""

from pprsr.graph import (
    DanglingPolicy,
    EmbeddingSet,
    GraphSpec,
    TransitionMatrix,
    build_gridworld,
    build_similarity_graph,
    load_edge_list,
    load_embeddings,
    to_transition_matrix,
)
from pprsr.ppr import (
    PPRConfig,
    PPRSolution,
    as_distribution,
    ppr_exact,
    ppr_power_iteration,
    teleport_matrix,
)
from pprsr.successor import (
    SRConfig,
    SuccessorMatrix,
    sr_invert,
    sr_series,
    sr_td,
    successor_matrix,
    value_function,
)
from pprsr.equivalence import (
    EquivalenceReport,
    check_equivalence,
    ppr_from_sr,
    reward_from_restart,
)
from pprsr.retrieval import (
    RankedResults,
    RetrievalComparison,
    compare_retrieval,
    ppr_retrieve,
    topk_cosine,
)

__version__ = "0.1.0"

__all__ = [
    "DanglingPolicy",
    "EmbeddingSet",
    "EquivalenceReport",
    "GraphSpec",
    "PPRConfig",
    "PPRSolution",
    "RankedResults",
    "RetrievalComparison",
    "SRConfig",
    "SuccessorMatrix",
    "TransitionMatrix",
    "as_distribution",
    "build_gridworld",
    "build_similarity_graph",
    "check_equivalence",
    "compare_retrieval",
    "load_edge_list",
    "load_embeddings",
    "ppr_exact",
    "ppr_from_sr",
    "ppr_power_iteration",
    "ppr_retrieve",
    "reward_from_restart",
    "sr_invert",
    "sr_series",
    "sr_td",
    "successor_matrix",
    "teleport_matrix",
    "to_transition_matrix",
    "topk_cosine",
    "value_function",
]
