"""Internal cluster-validation metrics (noise excluded before scoring)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment, _pairwise


class ValidationError(ValueError):
    pass


@dataclass
class ValidationReport:
    silhouette: float
    calinski_harabasz: float
    davies_bouldin: float
    n_clusters: int
    n_noise: int

    def to_dict(self) -> dict:
        return {
            "silhouette": self.silhouette,
            "calinski_harabasz": self.calinski_harabasz,
            "davies_bouldin": self.davies_bouldin,
            "n_clusters": self.n_clusters,
            "n_noise": self.n_noise,
        }


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean of s(i) = (b - a) / max(a, b); singleton clusters score 0."""
    dists = _pairwise(points)
    uniq = np.unique(labels)
    scores = np.zeros(len(points))
    for idx in range(len(points)):
        own = labels[idx]
        mask_own = labels == own
        if mask_own.sum() <= 1:
            scores[idx] = 0.0
            continue
        a = dists[idx, mask_own].sum() / (mask_own.sum() - 1)
        b = np.inf
        for other in uniq:
            if other == own:
                continue
            b = min(b, dists[idx, labels == other].mean())
        scores[idx] = (b - a) / max(a, b)
    return float(scores.mean())


def calinski_harabasz_score(points: np.ndarray, labels: np.ndarray) -> float:
    """[B / (k-1)] / [W / (n-k)] with trace dispersions; 1.0 when W is 0."""
    n = len(points)
    uniq = np.unique(labels)
    k = len(uniq)
    grand = points.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in uniq:
        members = points[labels == c]
        centroid = members.mean(axis=0)
        between += len(members) * float(np.sum((centroid - grand) ** 2))
        within += float(np.sum((members - centroid) ** 2))
    if within <= 0.0:
        return 1.0
    return (between / (k - 1)) / (within / (n - k))


def davies_bouldin_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j) ratio."""
    uniq = np.unique(labels)
    k = len(uniq)
    centroids = np.stack([points[labels == c].mean(axis=0) for c in uniq])
    scatter = np.array(
        [
            float(np.mean(np.linalg.norm(points[labels == c] - centroids[i], axis=1)))
            for i, c in enumerate(uniq)
        ]
    )
    total = 0.0
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            sep = float(np.linalg.norm(centroids[i] - centroids[j]))
            if sep > 0:
                worst = max(worst, (scatter[i] + scatter[j]) / sep)
        total += worst
    return total / k


def internal_validation(points: np.ndarray, assignment: ClusterAssignment) -> ValidationReport:
    """Silhouette, Calinski-Harabasz, and Davies-Bouldin on non-noise points."""
    points = np.asarray(points, dtype=np.float64)
    labels = assignment.labels
    keep = labels >= 0
    pts = points[keep]
    labs = labels[keep]
    uniq = np.unique(labs)
    if len(uniq) < 2:
        raise ValidationError(
            f"need at least 2 clusters for validation, got {len(uniq)}"
        )
    return ValidationReport(
        silhouette=silhouette_score(pts, labs),
        calinski_harabasz=calinski_harabasz_score(pts, labs),
        davies_bouldin=davies_bouldin_score(pts, labs),
        n_clusters=len(uniq),
        n_noise=int(np.sum(labels == -1)),
    )
