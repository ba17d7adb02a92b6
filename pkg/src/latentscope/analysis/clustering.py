"""Clustering of 2D projections: DBSCAN, GMM (EM), agglomerative.

All operate on (n, 2) coordinate arrays and return integer labels; -1
marks DBSCAN noise.  DBSCAN follows the textbook region-query expansion
with deterministic index order: clusters are seeded by the first
unvisited core point in index order, and border points keep the label
of the first cluster whose expansion reaches them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ClusterError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterParams:
    method: str = "dbscan"
    eps: Optional[float] = None  # None -> k-distance knee
    min_pts: int = 5
    k: int = 3  # gmm / ahc cluster count
    max_iter: int = 200
    tol: float = 1e-6
    linkage: str = "average"
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("dbscan", "gmm", "ahc"):
            raise ClusterError(f"unknown clustering method {self.method!r}")
        if self.eps is not None and self.eps <= 0:
            raise ClusterError("eps must be positive")
        if self.min_pts < 1:
            raise ClusterError("min_pts must be >= 1")
        if self.k < 1:
            raise ClusterError("k must be >= 1")
        if self.linkage not in ("single", "average", "complete"):
            raise ClusterError(f"unknown linkage {self.linkage!r}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "eps": self.eps,
            "min_pts": self.min_pts,
            "k": self.k,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "linkage": self.linkage,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterParams":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class ClusterAssignment:
    segment_ids: list[str]
    labels: np.ndarray
    params: ClusterParams
    eps_used: Optional[float] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != len(self.segment_ids):
            raise ClusterError("labels length != ids")
        if self.params.method != "dbscan" and np.any(self.labels < 0):
            raise ClusterError("noise labels are dbscan-only")

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels[self.labels >= 0].tolist()))

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.labels == -1))


def _pairwise(points: np.ndarray) -> np.ndarray:
    # direct differences: the expanded quadratic form loses ~1e-8 of
    # precision, enough to flip eps-boundary cases against the oracles
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def knee_eps(points: np.ndarray, min_pts: int) -> float:
    """k-distance knee (maximum deviation from the chord) for eps.

    Uses the distance to the min_pts-th nearest neighbor, sorted
    ascending; the knee is the point farthest from the line joining the
    curve's endpoints.
    """
    n = len(points)
    if n <= min_pts:
        raise ClusterError(f"need more than min_pts={min_pts} points, got {n}")
    dists = np.sort(_pairwise(points), axis=1)
    kdist = np.sort(dists[:, min_pts])
    if kdist[-1] <= 0:
        raise ClusterError("degenerate point set: all points identical")
    span = kdist[-1] - kdist[0]
    if span <= 0:
        return float(kdist[-1])
    med = float(np.median(kdist))
    # no outlier tail: the curve is one smooth density level, so every
    # point should be core -> eps just above the curve maximum
    if kdist[-1] < 2.5 * med:
        return float(kdist[-1]) * 1.05
    # heavy tail: maximum curvature of the smoothed, normalized curve
    # (restricted above the median) marks the core/outlier takeoff
    ys = (kdist - kdist[0]) / span
    window = max(3, n // 20)
    kernel = np.ones(window) / window
    smooth = np.convolve(np.pad(ys, window, mode="edge"), kernel, mode="same")
    smooth = smooth[window:-window]
    h = 1.0 / (n - 1)
    d1 = np.gradient(smooth, h)
    d2 = np.gradient(d1, h)
    curvature = d2 / np.power(1.0 + d1 * d1, 1.5)
    curvature[: n // 2] = -np.inf
    curvature[-max(1, n // 50):] = -np.inf
    eps = float(kdist[int(np.argmax(curvature))])
    return eps if eps > 0 else float(kdist[kdist > 0][0])


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Textbook DBSCAN; neighborhood includes the point itself."""
    n = len(points)
    dists = _pairwise(points)
    neighbors = [np.nonzero(dists[i] <= eps)[0] for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbors])

    labels = np.full(n, -2, dtype=np.int64)  # -2 unvisited, -1 noise
    cluster = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if not core[i]:
            labels[i] = -1
            continue
        labels[i] = cluster
        queue = list(neighbors[i])
        qpos = 0
        while qpos < len(queue):
            j = queue[qpos]
            qpos += 1
            if labels[j] == -1:
                labels[j] = cluster  # border point claimed by this cluster
            if labels[j] != -2:
                continue
            labels[j] = cluster
            if core[j]:
                queue.extend(neighbors[j])
        cluster += 1
    return labels


def _kmeanspp_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    seeds = [int(rng.integers(n))]
    d2 = np.sum((points - points[seeds[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            seeds.append(int(rng.integers(n)))
            continue
        probs = d2 / total
        seeds.append(int(rng.choice(n, p=probs)))
        d2 = np.minimum(d2, np.sum((points - points[seeds[-1]]) ** 2, axis=1))
    return points[seeds]


def gmm(points: np.ndarray, k: int, max_iter: int = 200, tol: float = 1e-6,
        seed: int = 0) -> np.ndarray:
    """Full-covariance EM, k-means++ seeded, labels by max responsibility."""
    n, d = points.shape
    if n < k:
        raise ClusterError(f"n={n} < k={k}")
    rng = np.random.default_rng(seed)
    means = _kmeanspp_seeds(points, k, rng)
    # one-hot responsibilities from the nearest seed
    dist = np.linalg.norm(points[:, None, :] - means[None, :, :], axis=2)
    resp = np.zeros((n, k))
    resp[np.arange(n), dist.argmin(axis=1)] = 1.0

    reg = 1e-6 * np.eye(d)
    weights = np.full(k, 1.0 / k)
    covs = np.stack([np.cov(points.T) + reg for _ in range(k)])
    prev_ll = -np.inf
    for _ in range(max_iter):
        # M step
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / n
        means = (resp.T @ points) / nk[:, None]
        for j in range(k):
            diff = points - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / nk[j] + reg
        # E step
        log_prob = np.zeros((n, k))
        for j in range(k):
            diff = points - means[j]
            cov = covs[j]
            inv = np.linalg.inv(cov)
            _, logdet = np.linalg.slogdet(cov)
            maha = np.sum((diff @ inv) * diff, axis=1)
            log_prob[:, j] = (
                -0.5 * (maha + d * np.log(2 * np.pi) + logdet) + np.log(weights[j])
            )
        top = log_prob.max(axis=1, keepdims=True)
        log_norm = top + np.log(np.sum(np.exp(log_prob - top), axis=1, keepdims=True))
        resp = np.exp(log_prob - log_norm)
        ll = float(log_norm.sum())
        if abs(ll - prev_ll) < tol * max(1.0, abs(prev_ll)):
            break
        prev_ll = ll
    return resp.argmax(axis=1).astype(np.int64)


def ahc(points: np.ndarray, k: int, linkage: str = "average") -> np.ndarray:
    """Naive agglomerative clustering cut at k clusters.

    O(n^3): repeatedly merge the closest pair under the linkage,
    breaking ties by the lexicographically smallest cluster pair.
    Labels are numbered by each final cluster's smallest member index.
    """
    n = len(points)
    if n < k:
        raise ClusterError(f"n={n} < k={k}")
    dists = _pairwise(points)
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    cd = dists.copy()
    np.fill_diagonal(cd, np.inf)

    def merged_distance(a: list[int], b: list[int]) -> float:
        block = dists[np.ix_(a, b)]
        if linkage == "single":
            return float(block.min())
        if linkage == "complete":
            return float(block.max())
        return float(block.mean())

    while len(clusters) > k:
        best = (np.inf, -1, -1)
        keys = sorted(clusters)
        for ai in range(len(keys)):
            for bi in range(ai + 1, len(keys)):
                a, b = keys[ai], keys[bi]
                val = cd[a, b]
                if val < best[0] - 1e-15:
                    best = (val, a, b)
        _, a, b = best
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
        for c in clusters:
            if c != a:
                val = merged_distance(clusters[a], clusters[c])
                cd[a, c] = cd[c, a] = val
        cd[b, :] = cd[:, b] = np.inf

    labels = np.zeros(n, dtype=np.int64)
    for new_label, key in enumerate(sorted(clusters, key=lambda c: min(clusters[c]))):
        labels[np.asarray(clusters[key])] = new_label
    return labels


def cluster(points: np.ndarray, params: ClusterParams,
            segment_ids: Optional[list[str]] = None) -> ClusterAssignment:
    """Cluster 2D coordinates according to params."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) < 1:
        raise ClusterError(f"need a nonempty (n, d) array, got {points.shape}")
    ids = segment_ids if segment_ids is not None else [str(i) for i in range(len(points))]
    eps_used = None
    if params.method == "dbscan":
        eps_used = params.eps if params.eps is not None else knee_eps(points, params.min_pts)
        labels = dbscan(points, eps_used, params.min_pts)
    elif params.method == "gmm":
        labels = gmm(points, params.k, params.max_iter, params.tol, params.seed)
    else:
        labels = ahc(points, params.k, params.linkage)
    return ClusterAssignment(
        segment_ids=list(ids), labels=labels, params=params, eps_used=eps_used
    )
