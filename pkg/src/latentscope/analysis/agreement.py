"""Cross-model neighbor agreement on 2D projections.

For each shared point: take its k nearest neighbors per side (Euclidean,
ties broken by ascending id), keep only neighbors sharing the point's
own cluster label on that side, and score the overlap of the two
filtered sets.  The mean over points, as a percentage, is the cluster
consistency between the two models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment
from ..projection import Projection2D


class AgreementError(ValueError):
    pass


@dataclass
class AgreementReport:
    k: int
    segment_ids: list[str]
    per_point_agreement: np.ndarray
    config_a: dict
    config_b: dict

    def __post_init__(self):
        self.per_point_agreement = np.asarray(self.per_point_agreement, dtype=np.float64)

    @property
    def mean_percent(self) -> float:
        return float(100.0 * self.per_point_agreement.mean())

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "segment_ids": self.segment_ids,
            "per_point_agreement": self.per_point_agreement.tolist(),
            "mean_percent": self.mean_percent,
            "config_a": self.config_a,
            "config_b": self.config_b,
        }


def _filtered_neighbor_sets(coords: np.ndarray, labels: np.ndarray, k: int) -> list[set]:
    """kNN sets filtered to the point's own label.

    Rows must already be in ascending-id order, so the index doubles as
    the tie-break key.
    """
    n = len(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    sets = []
    for i in range(n):
        row = d2[i]
        idx = sorted((j for j in range(n) if j != i), key=lambda j: (row[j], j))
        sets.append({j for j in idx[:k] if labels[j] == labels[i]})
    return sets


def cluster_agreement(
    proj_a: Projection2D,
    clus_a: ClusterAssignment,
    proj_b: Projection2D,
    clus_b: ClusterAssignment,
    k: int = 10,
) -> AgreementReport:
    """Proportion of identical cluster-constrained neighbors per point.

    Per-point score: |N_A & N_B| / max(|N_A|, |N_B|), with 1.0 when both
    filtered sets are empty.
    """
    if list(proj_a.segment_ids) != list(clus_a.segment_ids) or list(
        proj_b.segment_ids
    ) != list(clus_b.segment_ids):
        raise AgreementError("projection and clustering ids do not match")
    if set(proj_a.segment_ids) != set(proj_b.segment_ids):
        raise AgreementError("the two sides cover different id sets")
    n = len(proj_a.segment_ids)
    if k >= n:
        raise AgreementError(f"k={k} must be smaller than n={n}")
    if k < 1:
        raise AgreementError("k must be >= 1")

    ids = sorted(proj_a.segment_ids)
    index_a = {sid: i for i, sid in enumerate(proj_a.segment_ids)}
    index_b = {sid: i for i, sid in enumerate(proj_b.segment_ids)}
    order_a = [index_a[sid] for sid in ids]
    order_b = [index_b[sid] for sid in ids]
    coords_a = proj_a.coords[order_a]
    coords_b = proj_b.coords[order_b]
    labels_a = clus_a.labels[order_a]
    labels_b = clus_b.labels[order_b]

    sets_a = _filtered_neighbor_sets(coords_a, labels_a, k)
    sets_b = _filtered_neighbor_sets(coords_b, labels_b, k)

    scores = np.zeros(n)
    for i in range(n):
        na, nb = sets_a[i], sets_b[i]
        if not na and not nb:
            scores[i] = 1.0
        else:
            scores[i] = len(na & nb) / max(len(na), len(nb))
    return AgreementReport(
        k=k,
        segment_ids=ids,
        per_point_agreement=scores,
        config_a=proj_a.config.to_dict(),
        config_b=proj_b.config.to_dict(),
    )
