"""Clustering, validation metrics, agreement, and correspondence."""

from .agreement import AgreementError, AgreementReport, cluster_agreement
from .clustering import (
    ClusterAssignment,
    ClusterError,
    ClusterParams,
    ahc,
    cluster,
    dbscan,
    gmm,
    knee_eps,
)
from .cooccurrence import label_cooccurrence
from .correspondence import (
    CorrespondenceError,
    CorrespondenceReport,
    correspondence,
    similarity_procrustes,
)
from .metrics import (
    ValidationError,
    ValidationReport,
    calinski_harabasz_score,
    davies_bouldin_score,
    internal_validation,
    silhouette_score,
)

__all__ = [
    "AgreementError",
    "AgreementReport",
    "ClusterAssignment",
    "ClusterError",
    "ClusterParams",
    "CorrespondenceError",
    "CorrespondenceReport",
    "ValidationError",
    "ValidationReport",
    "ahc",
    "calinski_harabasz_score",
    "cluster",
    "cluster_agreement",
    "correspondence",
    "davies_bouldin_score",
    "dbscan",
    "gmm",
    "internal_validation",
    "knee_eps",
    "label_cooccurrence",
    "silhouette_score",
    "similarity_procrustes",
]
