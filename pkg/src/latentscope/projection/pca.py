"""PCA projection with a deterministic sign convention."""

from __future__ import annotations

import numpy as np

from .types import ProjectionError


def pca_reduce(matrix: np.ndarray, out_dims: int = 2):
    """Project rows onto the top principal components.

    Returns (scores, explained_variance_ratio).  Sign convention: each
    component's largest-magnitude loading is positive, so the result is
    reproducible across SVD implementations.
    """
    x = np.asarray(matrix, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ProjectionError(f"need at least 2 rows, got {n}")
    if d < out_dims:
        raise ProjectionError(f"need at least {out_dims} columns, got {d}")
    centered = x - x.mean(axis=0)
    if np.allclose(centered, 0.0):
        raise ProjectionError("degenerate input: all rows identical")
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    for i in range(out_dims):
        pivot = np.argmax(np.abs(vt[i]))
        if vt[i, pivot] < 0:
            vt[i] = -vt[i]
            u[:, i] = -u[:, i]
    scores = u[:, :out_dims] * s[:out_dims]
    total = float(np.sum(s * s))
    ratios = (s[:out_dims] ** 2 / total).tolist() if total > 0 else [0.0] * out_dims
    return scores, ratios
