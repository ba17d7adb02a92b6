"""Projection tests: PCA sign convention, t-SNE dynamics, UMAP layout."""

import numpy as np
import pytest

from latentscope.encoders import EncoderConfig, LatentMatrix
from latentscope.projection import (
    Projection2D,
    ProjectionConfig,
    ProjectionError,
    conditional_affinities,
    load_projection,
    pca_project,
    pca_reduce,
    project,
    save_projection,
    tsne_project,
    tsne_reduce,
    umap_project,
)
from latentscope.analysis import ClusterParams, cluster

from oracles import pca_oracle


def _latents(vectors, kind="tft"):
    vectors = np.asarray(vectors, dtype=np.float64)
    cfg = EncoderConfig(kind=kind, latent_dim=vectors.shape[1], model_input_len=16,
                        d_model=16, n_heads=2)
    return LatentMatrix(
        segment_ids=[f"s{i:03d}" for i in range(len(vectors))],
        vectors=vectors,
        config=cfg,
    )


def _blobs(n_per, centers, spread=0.5, dims=8, seed=0):
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for ci, center in enumerate(centers):
        mu = np.zeros(dims)
        mu[: len(center)] = center
        rows.append(mu + spread * rng.standard_normal((n_per, dims)))
        labels += [ci] * n_per
    return np.vstack(rows), np.asarray(labels)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

def test_pca_diagonal_line():
    scores, ratios = pca_reduce(np.array([[-1.0, -1.0], [0.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(scores[:, 0], [-np.sqrt(2), 0.0, np.sqrt(2)], atol=1e-12)
    assert ratios[0] == pytest.approx(1.0)


def test_pca_2d_preserves_geometry_and_variance():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 2))
    scores, ratios = pca_reduce(x)
    assert sum(ratios) == pytest.approx(1.0)
    # rigid rotation: pairwise distances survive
    def pd(m):
        return np.linalg.norm(m[:, None] - m[None, :], axis=2)

    np.testing.assert_allclose(pd(scores), pd(x - x.mean(axis=0)), atol=1e-9)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_pca_matches_eigen_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((20, 8))
    scores, _ = pca_reduce(x)
    expected = pca_oracle(x)
    for comp in range(2):
        a, b = scores[:, comp], expected[:, comp]
        assert min(np.abs(a - b).max(), np.abs(a + b).max()) < 1e-8


def test_pca_rotation_invariance_up_to_sign():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((30, 6))
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    a, _ = pca_reduce(x)
    b, _ = pca_reduce(x @ q)
    for comp in range(2):
        assert (
            min(np.abs(a[:, comp] - b[:, comp]).max(),
                np.abs(a[:, comp] + b[:, comp]).max())
            < 1e-8
        )


def test_pca_rejects_degenerate():
    with pytest.raises(ProjectionError, match="identical"):
        pca_reduce(np.ones((5, 3)))


# ---------------------------------------------------------------------------
# t-SNE
# ---------------------------------------------------------------------------

def test_tsne_output_shape_and_metadata():
    x, _ = _blobs(15, [(0,), (8,)], seed=2)
    proj = tsne_project(_latents(x), ProjectionConfig(method="tsne", n_iter=300, seed=0))
    assert proj.coords.shape == (30, 2)
    assert proj.kl_final is not None and np.isfinite(proj.kl_final)


def test_tsne_kl_monotone_tail():
    x, _ = _blobs(20, [(0,), (10,)], seed=3)
    cfg = ProjectionConfig(method="tsne", n_iter=1000, seed=1)
    _, trace = tsne_reduce(x, cfg)
    tail = trace[-100:]
    for prev, nxt in zip(tail, tail[1:]):
        assert nxt <= prev + 1e-3


def test_tsne_separates_distant_blobs():
    # two gaussian blobs 20 sigma apart must stay separable in 2D
    x, labels = _blobs(20, [(0,), (20.0,)], spread=1.0, seed=4)
    cfg = ProjectionConfig(method="tsne", n_iter=500, seed=2)
    coords, _ = tsne_reduce(x, cfg)
    a = coords[labels == 0]
    b = coords[labels == 1]
    intra = max(
        np.linalg.norm(a[:, None] - a[None, :], axis=2).max(),
        np.linalg.norm(b[:, None] - b[None, :], axis=2).max(),
    )
    inter = np.linalg.norm(a[:, None] - b[None, :], axis=2).min()
    assert intra < inter


def test_tsne_entropy_binary_search():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((60, 4))
    d2 = np.sum((x[:, None] - x[None, :]) ** 2, axis=2)
    perplexity = 12.0
    _, entropies = conditional_affinities(d2, perplexity)
    np.testing.assert_allclose(entropies, np.log(perplexity), atol=1e-4)


def test_tsne_deterministic():
    x, _ = _blobs(10, [(0,), (5,)], seed=6)
    cfg = ProjectionConfig(method="tsne", n_iter=150, seed=7)
    a, _ = tsne_reduce(x, cfg)
    b, _ = tsne_reduce(x, cfg)
    assert np.array_equal(a, b)


def test_tsne_perplexity_guard():
    x, _ = _blobs(5, [(0,), (5,)], seed=8)
    with pytest.raises(ProjectionError, match="perplexity"):
        tsne_reduce(x, ProjectionConfig(method="tsne", perplexity=5.0))


# ---------------------------------------------------------------------------
# UMAP
# ---------------------------------------------------------------------------

def test_umap_shape_and_determinism():
    x, _ = _blobs(20, [(0,), (12,)], seed=9)
    cfg = ProjectionConfig(method="umap", n_neighbors=8, n_epochs=60, seed=3)
    a = umap_project(_latents(x), cfg)
    b = umap_project(_latents(x), cfg)
    assert a.coords.shape == (40, 2)
    assert np.array_equal(a.coords, b.coords)


def test_umap_blobs_recoverable_by_dbscan():
    x, labels = _blobs(25, [(0,), (15,)], spread=0.8, seed=10)
    cfg = ProjectionConfig(method="umap", n_neighbors=10, n_epochs=100, seed=4)
    proj = umap_project(_latents(x), cfg)
    assignment = cluster(proj.coords, ClusterParams(method="dbscan", min_pts=4))
    found = assignment.n_clusters
    assert found == 2
    # clusters align with the generating blobs
    first = assignment.labels[labels == 0]
    second = assignment.labels[labels == 1]
    assert len(set(first[first >= 0])) == 1
    assert len(set(second[second >= 0])) == 1
    assert set(first[first >= 0]) != set(second[second >= 0])


def test_umap_too_few_points():
    x = np.random.default_rng(0).standard_normal((6, 4))
    with pytest.raises(ProjectionError, match="too small"):
        umap_project(_latents(x), ProjectionConfig(method="umap", n_neighbors=10))


# ---------------------------------------------------------------------------
# shared behavior
# ---------------------------------------------------------------------------

def test_scale_invariance_of_pca_plus_dbscan():
    x, _ = _blobs(20, [(0,), (10,)], seed=11)
    lat = _latents(x)
    proj1 = pca_project(lat)
    scaled = _latents(x * 3.0)
    proj2 = pca_project(scaled)
    eps = 1.5
    l1 = cluster(proj1.coords, ClusterParams(method="dbscan", eps=eps, min_pts=4))
    l2 = cluster(proj2.coords, ClusterParams(method="dbscan", eps=eps * 3.0, min_pts=4))
    assert np.array_equal(l1.labels, l2.labels)


def test_projection_file_round_trip(tmp_path):
    x, _ = _blobs(8, [(0,), (9,)], seed=12)
    proj = pca_project(_latents(x))
    path = save_projection(proj, tmp_path / "proj.json")
    loaded = load_projection(path)
    assert loaded.segment_ids == proj.segment_ids
    np.testing.assert_allclose(loaded.coords, proj.coords)
    assert loaded.config.method == "pca"
    assert loaded.explained_variance == pytest.approx(proj.explained_variance)


def test_project_dispatch():
    x, _ = _blobs(10, [(0,), (7,)], seed=13)
    lat = _latents(x)
    for method in ("pca", "tsne", "umap"):
        cfg = ProjectionConfig(method=method, n_iter=100, n_epochs=30, n_neighbors=5)
        out = project(lat, cfg)
        assert isinstance(out, Projection2D)
        assert out.coords.shape == (20, 2)
