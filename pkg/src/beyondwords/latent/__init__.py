"""Latent structure: truncated SVD, k-means, and cluster validity indices."""

from .kmeans import ClusterModel, ElbowResult, elbow_from_inertias, elbow_select, kmeans
from .quality import ClusterQuality, ch_index, cluster_quality, db_index, silhouette
from .svd import SvdFactors, explained_variance, full_svd, select_rank, truncated_svd

__all__ = [
    "ClusterModel", "ClusterQuality", "ElbowResult", "SvdFactors",
    "ch_index", "cluster_quality", "db_index", "elbow_from_inertias", "elbow_select",
    "explained_variance", "full_svd", "kmeans", "select_rank", "silhouette", "truncated_svd",
]
