"""Zombie-account detection for directed follower graphs.

Pipeline: ingest a follower network, split it into communities by greedy
modularity optimization, rank accounts inside each community with an
unevenly-weighted power iteration, and flag accounts whose importance
falls below the community's IQR lower fence.
"""

from .community import (Dendrogram, LouvainConfig, Partition, community_views,
                        louvain, modularity, move_gain)
from .detect import ZombieReport, detect_zombies, iqr_threshold, quartiles
from .errors import CacheError, ParseError, ValidationError
from .evaluate import (ConfusionMatrix, MetricSet, confusion, degree_histogram,
                       metrics, region_distribution)
from .graph import (DirectedGraph, SubgraphView, UndirectedGraph, build_graph,
                    induced_subgraph, symmetrize)
from .ingest import (ProfileSchema, RawNetwork, UserProfile, cache_load, cache_save,
                     parse_profiles, parse_uidlist, parse_weibo_network)
from .rank import (ImportanceVector, IOScores, RankConfig, io_score, io_scores_for,
                   pagerank, rank_all_communities, transition_weights)
from .synth import GroundTruth, SynthConfig, emit_weibo_format, generate

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "build_graph", "symmetrize", "induced_subgraph",
    "DirectedGraph", "UndirectedGraph", "SubgraphView",
    "parse_weibo_network", "parse_uidlist", "parse_profiles",
    "cache_save", "cache_load", "RawNetwork", "UserProfile", "ProfileSchema",
    "louvain", "modularity", "move_gain", "community_views",
    "Partition", "LouvainConfig", "Dendrogram",
    "io_score", "io_scores_for", "transition_weights", "pagerank",
    "rank_all_communities", "IOScores", "RankConfig", "ImportanceVector",
    "quartiles", "iqr_threshold", "detect_zombies", "ZombieReport",
    "confusion", "metrics", "region_distribution", "degree_histogram",
    "ConfusionMatrix", "MetricSet",
    "generate", "emit_weibo_format", "SynthConfig", "GroundTruth",
    "ValidationError", "ParseError", "CacheError",
]
