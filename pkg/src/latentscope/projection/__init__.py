"""2D projections of latent matrices: PCA, exact t-SNE, UMAP."""

from __future__ import annotations

import numpy as np

from ..encoders import LatentMatrix
from .pca import pca_reduce
from .tsne import conditional_affinities, tsne_reduce
from .types import (
    METHODS,
    Projection2D,
    ProjectionConfig,
    ProjectionError,
    load_projection,
    save_projection,
)
from .umap_ import fuzzy_graph, umap_reduce


def pca_project(latents: LatentMatrix, config: ProjectionConfig | None = None,
                source_hash: str = "") -> Projection2D:
    cfg = config or ProjectionConfig(method="pca")
    coords, ratios = pca_reduce(latents.vectors, cfg.out_dims)
    return Projection2D(
        segment_ids=list(latents.segment_ids),
        coords=coords,
        config=cfg,
        source_config_hash=source_hash,
        explained_variance=ratios,
    )


def tsne_project(latents: LatentMatrix, config: ProjectionConfig | None = None,
                 source_hash: str = "") -> Projection2D:
    cfg = config or ProjectionConfig(method="tsne")
    coords, kl_trace = tsne_reduce(latents.vectors, cfg)
    return Projection2D(
        segment_ids=list(latents.segment_ids),
        coords=coords,
        config=cfg,
        source_config_hash=source_hash,
        kl_final=kl_trace[-1] if kl_trace else None,
    )


def umap_project(latents: LatentMatrix, config: ProjectionConfig | None = None,
                 source_hash: str = "") -> Projection2D:
    cfg = config or ProjectionConfig(method="umap")
    coords = umap_reduce(latents.vectors, cfg)
    return Projection2D(
        segment_ids=list(latents.segment_ids),
        coords=coords,
        config=cfg,
        source_config_hash=source_hash,
    )


def project(latents: LatentMatrix, config: ProjectionConfig,
            source_hash: str = "") -> Projection2D:
    """Dispatch on config.method."""
    if config.method == "pca":
        return pca_project(latents, config, source_hash)
    if config.method == "tsne":
        return tsne_project(latents, config, source_hash)
    if config.method == "umap":
        return umap_project(latents, config, source_hash)
    raise ProjectionError(f"unknown method {config.method!r}")


__all__ = [
    "METHODS",
    "Projection2D",
    "ProjectionConfig",
    "ProjectionError",
    "conditional_affinities",
    "fuzzy_graph",
    "load_projection",
    "pca_project",
    "pca_reduce",
    "project",
    "save_projection",
    "tsne_project",
    "tsne_reduce",
    "umap_project",
    "umap_reduce",
]
