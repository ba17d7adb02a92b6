"""Exact t-SNE with per-point entropy-matched bandwidths.

Desk-scale O(n^2) implementation: conditional affinities via binary
search on each point's Gaussian bandwidth so the row entropy equals
log(perplexity), symmetrized to a joint P; Student-t low-dimensional
affinities; plain momentum gradient descent with x12 early exaggeration
for the first 250 iterations and momentum switching 0.5 -> 0.8 there.
"""

from __future__ import annotations

import numpy as np

from .pca import pca_reduce
from .types import ProjectionConfig, ProjectionError

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_EARLY = 0.5
MOMENTUM_LATE = 0.8
ENTROPY_TOL = 1e-5
MAX_BISECTIONS = 50
P_FLOOR = 1e-12


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def conditional_affinities(d2: np.ndarray, perplexity: float):
    """Per-row Gaussian affinities whose entropy matches log(perplexity).

    Returns (P_conditional, row_entropies).
    """
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    entropies = np.zeros(n)
    for i in range(n):
        row = np.delete(d2[i], i)
        beta = 1.0  # precision 1 / (2 sigma^2)
        beta_min, beta_max = 0.0, np.inf
        for _ in range(MAX_BISECTIONS):
            w = np.exp(-row * beta)
            total = w.sum()
            if total <= 0:
                h = 0.0
                probs = np.zeros_like(w)
            else:
                probs = w / total
                nz = probs > 0
                h = -np.sum(probs[nz] * np.log(probs[nz]))
            diff = h - target
            if abs(diff) < ENTROPY_TOL:
                break
            if diff > 0:  # entropy too high -> narrow the kernel
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
        entropies[i] = h
        p[i, np.arange(n) != i] = probs
    return p, entropies


def tsne_reduce(matrix: np.ndarray, config: ProjectionConfig):
    """Returns (coords, kl_trace) over the optimization."""
    x = np.asarray(matrix, dtype=np.float64)
    n = x.shape[0]
    perplexity = config.perplexity
    if perplexity is None:
        perplexity = min(30.0, 0.999 * (n - 1) / 3.0)
    if perplexity >= (n - 1) / 3.0:
        raise ProjectionError(
            f"perplexity {perplexity} too large for n={n} (needs < (n-1)/3)"
        )
    if perplexity <= 1:
        raise ProjectionError(f"perplexity {perplexity} too small (n={n})")

    d2 = _pairwise_sq(x)
    p_cond, _ = conditional_affinities(d2, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, P_FLOOR)

    rng = np.random.default_rng(config.seed)
    if config.init == "pca" and x.shape[1] >= config.out_dims:
        init, _ = pca_reduce(x, config.out_dims)
        init = init / (init[:, 0].std() + 1e-12) * 1e-4
    else:
        init = rng.standard_normal((n, config.out_dims)) * 1e-4

    lr = config.learning_rate
    if lr is None:
        lr = max(n / (4.0 * EXAGGERATION), 50.0)

    # reference optimizer: momentum plus per-coordinate adaptive gains
    y = init.copy()
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_trace = []
    for it in range(config.n_iter):
        exaggerate = it < EXAGGERATION_ITERS
        p_eff = p * EXAGGERATION if exaggerate else p
        num = 1.0 / (1.0 + _pairwise_sq(y))
        np.fill_diagonal(num, 0.0)
        q_norm = num.sum()
        q = np.maximum(num / q_norm, P_FLOOR)

        grad_coef = (p_eff - num / q_norm) * num
        grad = 4.0 * (grad_coef.sum(axis=1)[:, None] * y - grad_coef @ y)
        momentum = MOMENTUM_EARLY if exaggerate else MOMENTUM_LATE
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - lr * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)

        kl = float(np.sum(p * np.log(p / q)))
        kl_trace.append(kl)
    return y, kl_trace
