"""Compact UMAP: fuzzy graph construction plus negative-sampling layout.

Exact kNN at desk scale.  Per point, rho is the nearest-neighbor
distance and sigma solves sum_j exp(-max(0, d_ij - rho_i) / sigma_i) =
log2(n_neighbors) by bisection; memberships are symmetrized with the
probabilistic t-conorm a + b - ab.  The (a, b) output-curve parameters
are least-squares fit to the min_dist membership curve, and the layout
runs epoch-scheduled attractive updates with 5 negative samples per
edge, both seeded and single-threaded.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import curve_fit

from .pca import pca_reduce
from .types import ProjectionConfig, ProjectionError

SMOOTH_TOL = 1e-5
SMOOTH_ITERS = 64
NEGATIVE_SAMPLES = 5
CLIP = 4.0
MIN_DIST_SCALE = 1e-3


def _pairwise(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    return np.sqrt(d2)


def smooth_knn_calibration(knn_dists: np.ndarray, n_neighbors: int):
    """Per-point (rho, sigma) matching the log2(k) connectivity target."""
    n = knn_dists.shape[0]
    target = np.log2(n_neighbors)
    rho = np.zeros(n)
    sigma = np.zeros(n)
    for i in range(n):
        dist = knn_dists[i]
        nonzero = dist[dist > 0.0]
        rho[i] = nonzero[0] if nonzero.size else 0.0
        lo, hi, mid = 0.0, np.inf, 1.0
        for _ in range(SMOOTH_ITERS):
            val = np.sum(np.exp(-np.maximum(0.0, dist - rho[i]) / mid))
            if abs(val - target) < SMOOTH_TOL:
                break
            if val > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigma[i] = mid
        mean_dist = dist.mean()
        if rho[i] > 0.0 and sigma[i] < MIN_DIST_SCALE * mean_dist:
            sigma[i] = MIN_DIST_SCALE * mean_dist
    return rho, sigma


def fuzzy_graph(x: np.ndarray, n_neighbors: int):
    """Symmetrized membership matrix over the exact kNN graph."""
    n = x.shape[0]
    if n <= n_neighbors:
        raise ProjectionError(f"n={n} too small for n_neighbors={n_neighbors}")
    dists = _pairwise(x)
    order = np.argsort(dists, axis=1, kind="stable")
    knn_idx = order[:, 1 : n_neighbors + 1]
    knn_d = np.take_along_axis(dists, knn_idx, axis=1)
    rho, sigma = smooth_knn_calibration(knn_d, n_neighbors)

    w = np.zeros((n, n))
    for i in range(n):
        w[i, knn_idx[i]] = np.exp(-np.maximum(0.0, knn_d[i] - rho[i]) / sigma[i])
    return w + w.T - w * w.T


def fit_output_curve(min_dist: float):
    """Least-squares (a, b) for 1 / (1 + a d^(2b)) ~ min_dist curve."""
    grid = np.linspace(0.0, 3.0, 300)
    target = np.where(grid <= min_dist, 1.0, np.exp(-(grid - min_dist)))

    def curve(d, a, b):
        return 1.0 / (1.0 + a * d ** (2.0 * b))

    (a, b), _ = curve_fit(curve, grid, target, p0=(1.0, 1.0), maxfev=5000)
    return float(a), float(b)


def umap_reduce(matrix: np.ndarray, config: ProjectionConfig) -> np.ndarray:
    x = np.asarray(matrix, dtype=np.float64)
    n = x.shape[0]
    graph = fuzzy_graph(x, config.n_neighbors)
    a, b = fit_output_curve(config.min_dist)

    init, _ = pca_reduce(x, config.out_dims)
    span = np.abs(init).max() + 1e-12
    y = (init / span) * 10.0

    heads, tails = np.nonzero(np.triu(graph, k=1))
    weights = graph[heads, tails]
    keep = weights > 0
    heads, tails, weights = heads[keep], tails[keep], weights[keep]
    if heads.size == 0:
        raise ProjectionError("empty fuzzy graph")

    # reference-style epoch schedule: strong edges update every epoch
    epochs_per_sample = weights.max() / weights
    next_due = epochs_per_sample.copy()
    rng = np.random.default_rng(config.seed)

    for epoch in range(1, config.n_epochs + 1):
        alpha = 1.0 - (epoch - 1) / config.n_epochs
        due = np.nonzero(next_due <= epoch)[0]
        for e in due:
            i, j = heads[e], tails[e]
            diff = y[i] - y[j]
            d2 = float(diff @ diff)
            if d2 > 0.0:
                coef = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2 ** b)
                move = np.clip(coef * diff, -CLIP, CLIP)
                y[i] += alpha * move
                y[j] -= alpha * move
            for _ in range(NEGATIVE_SAMPLES):
                k = int(rng.integers(0, n))
                if k == i:
                    continue
                diff = y[i] - y[k]
                d2 = float(diff @ diff)
                coef = (2.0 * b) / ((0.001 + d2) * (1.0 + a * d2 ** b))
                move = np.clip(coef * diff, -CLIP, CLIP)
                y[i] += alpha * move
            next_due[e] += epochs_per_sample[e]
    return y
