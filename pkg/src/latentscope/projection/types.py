"""Projection configuration and the 2D result container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

METHODS = ("pca", "tsne", "umap")


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionConfig:
    method: str = "tsne"
    out_dims: int = 2
    # t-SNE
    perplexity: Optional[float] = None  # None -> min(30, (n-1)/3)
    n_iter: int = 1000
    learning_rate: Optional[float] = None  # None -> max(n/48, 50)
    init: str = "pca"
    # UMAP
    n_neighbors: int = 15
    min_dist: float = 0.1
    n_epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ProjectionError(f"unknown projection method {self.method!r}")
        if self.init not in ("pca", "random"):
            raise ProjectionError(f"unknown init {self.init!r}")
        if self.n_neighbors < 2:
            raise ProjectionError("n_neighbors must be >= 2")
        if self.perplexity is not None and self.perplexity <= 0:
            raise ProjectionError("perplexity must be positive")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "out_dims": self.out_dims,
            "perplexity": self.perplexity,
            "n_iter": self.n_iter,
            "learning_rate": self.learning_rate,
            "init": self.init,
            "n_neighbors": self.n_neighbors,
            "min_dist": self.min_dist,
            "n_epochs": self.n_epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class Projection2D:
    segment_ids: list[str]
    coords: np.ndarray  # (n, out_dims)
    config: ProjectionConfig
    source_config_hash: str = ""
    kl_final: Optional[float] = None
    explained_variance: Optional[list[float]] = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.shape[0] != len(self.segment_ids):
            raise ProjectionError("coordinate rows != segment ids")
        if not np.all(np.isfinite(self.coords)):
            raise ProjectionError("non-finite coordinates")


def save_projection(proj: Projection2D, path: Union[str, Path]) -> Path:
    payload = {
        "ids": proj.segment_ids,
        "coords": proj.coords.tolist(),
        "config": proj.config.to_dict(),
        "source_config_hash": proj.source_config_hash,
    }
    if proj.kl_final is not None:
        payload["kl_final"] = proj.kl_final
    if proj.explained_variance is not None:
        payload["explained_variance"] = proj.explained_variance
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path


def load_projection(path: Union[str, Path]) -> Projection2D:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return Projection2D(
        segment_ids=payload["ids"],
        coords=np.asarray(payload["coords"], dtype=np.float64),
        config=ProjectionConfig.from_dict(payload["config"]),
        source_config_hash=payload.get("source_config_hash", ""),
        kl_final=payload.get("kl_final"),
        explained_variance=payload.get("explained_variance"),
    )
