"""Cluster live-stream chatters by what they write.

Chat logs become one document per chatter; documents are embedded,
compared by cosine similarity and grouped with affinity propagation.
"""

from .cluster import APParams, Cluster, Clustering, affinity_propagation, brute_force_exemplars
from .embed import (
    EmbeddingCache,
    LocalEmbedderConfig,
    LocalHashEmbedder,
    RemoteEmbedder,
    RemoteEmbedderConfig,
    cache_fetch_or_embed,
    embed_documents,
    local_hash_embed,
    remote_embed_batch,
)
from .ingest import ChatMessage, dataset_summary, engagement_histogram, parse_chat_log, read_chat_log
from .profile import ChatterProfile, build_profiles, filter_by_activity
from .refine import AutoMergeParams, MergeSpec, apply_merge_spec, auto_merge, cluster_centroid, prune_singletons
from .report import ClusterReport, cluster_report, render, top_terms
from .similarity import AffinityMatrix, build_affinity_matrix, cosine_similarity, median_preference

__all__ = [
    "APParams",
    "AffinityMatrix",
    "AutoMergeParams",
    "ChatMessage",
    "ChatterProfile",
    "Cluster",
    "ClusterReport",
    "Clustering",
    "EmbeddingCache",
    "LocalEmbedderConfig",
    "LocalHashEmbedder",
    "MergeSpec",
    "RemoteEmbedder",
    "RemoteEmbedderConfig",
    "affinity_propagation",
    "apply_merge_spec",
    "auto_merge",
    "brute_force_exemplars",
    "build_affinity_matrix",
    "build_profiles",
    "cache_fetch_or_embed",
    "cluster_centroid",
    "cluster_report",
    "cosine_similarity",
    "dataset_summary",
    "embed_documents",
    "engagement_histogram",
    "filter_by_activity",
    "local_hash_embed",
    "median_preference",
    "parse_chat_log",
    "prune_singletons",
    "read_chat_log",
    "remote_embed_batch",
    "render",
    "top_terms",
]

__version__ = "0.1.0"
