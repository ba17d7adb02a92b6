"""Read-side payload builders shared by the HTTP API and the CLI."""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from ..analysis import label_cooccurrence
from ..encoders import load_latents
from ..projection import load_projection
from .pipeline import PROJ_NAME, load_cluster_assignment, read_comparison
from .store import RunStore, StoreError


def _require_complete(store: RunStore, run_id: str):
    manifest = store.read_manifest(run_id)
    if manifest is None:
        raise StoreError(f"unknown run {run_id!r}")
    if manifest.status != "complete":
        raise StoreError(f"run {run_id!r} is {manifest.status}")
    return manifest


def build_map_payload(store: RunStore, run_id: str) -> dict:
    """Point payload for the latent map view."""
    manifest = _require_complete(store, run_id)
    run_dir = store.run_dir(run_id)
    proj = load_projection(run_dir / PROJ_NAME)
    assignment = load_cluster_assignment(run_dir)
    segset, taxonomy, _fp = store.load_dataset(manifest.dataset_name)

    seg_by_id = {s.segment_id: s for s in segset.segments}
    points = []
    for sid, (x, y), label in zip(proj.segment_ids, proj.coords, assignment.labels):
        seg = seg_by_id.get(sid)
        points.append(
            {
                "id": sid,
                "x": float(x),
                "y": float(y),
                "cluster": int(label),
                "labels": seg.labels.codes(taxonomy) if seg else [],
                "duration_s": float(seg.event_duration_s) if seg else 0.0,
                "padded_fraction": float(seg.padded_fraction) if seg else 0.0,
            }
        )
    return {
        "run_id": run_id,
        "dataset": manifest.dataset_name,
        "projection": manifest.projection,
        "cluster_params": manifest.cluster,
        "points": points,
    }


def build_tree_payload(store: RunStore, dataset_name: str) -> dict:
    """Taxonomy nodes plus the label co-occurrence matrix."""
    segset, taxonomy, fingerprint = store.load_dataset(dataset_name)
    counts = label_cooccurrence(segset)
    return {
        "dataset": dataset_name,
        "fingerprint": fingerprint,
        "nodes": [
            {
                "code": node.code,
                "name": node.name,
                "parent_code": node.parent_code,
            }
            for node in taxonomy.nodes
        ],
        "codes": list(segset.taxonomy_codes),
        "cooccurrence": counts.tolist(),
    }


def build_metrics_payload(store: RunStore, run_id: str) -> dict:
    manifest = _require_complete(store, run_id)
    run_dir = store.run_dir(run_id)
    train_report = json.loads(
        (run_dir / "train_report.json").read_text(encoding="utf-8")
    )
    return {
        "run_id": run_id,
        "validation": manifest.validation,
        "train": train_report,
    }


def build_latents_payload(store: RunStore, run_id: str,
                          ids: Optional[list[str]] = None) -> dict:
    _require_complete(store, run_id)
    latents = load_latents(store.run_dir(run_id) / "latents")
    if ids:
        index = {sid: i for i, sid in enumerate(latents.segment_ids)}
        missing = [sid for sid in ids if sid not in index]
        if missing:
            raise StoreError(f"unknown segment ids: {', '.join(missing)}")
        rows = [index[sid] for sid in ids]
        vectors = latents.vectors[rows]
        out_ids = list(ids)
    else:
        vectors = latents.vectors
        out_ids = list(latents.segment_ids)
    return {
        "run_id": run_id,
        "ids": out_ids,
        "latent_dim": latents.latent_dim,
        "vectors": [[float(np.float32(v)) for v in row] for row in vectors],
    }


def build_compare_payload(store: RunStore, run_a: str, run_b: str) -> Optional[dict]:
    stored = read_comparison(store, run_a, run_b)
    if stored is None:
        return None
    pa = load_projection(store.run_dir(run_a) / PROJ_NAME)
    pb = load_projection(store.run_dir(run_b) / PROJ_NAME)
    index_a = {sid: i for i, sid in enumerate(pa.segment_ids)}
    index_b = {sid: i for i, sid in enumerate(pb.segment_ids)}
    shared = stored["correspondence"]["segment_ids"]
    stored["coords_a"] = [
        [float(v) for v in pa.coords[index_a[sid]]] for sid in shared
    ]
    stored["coords_b"] = [
        [float(v) for v in pb.coords[index_b[sid]]] for sid in shared
    ]
    return stored


def export_latents_csv(store: RunStore, run_id: str) -> str:
    """CSV that round-trips the float32 latents exactly.

    Values are written as the shortest decimal that parses back to the
    same float32.
    """
    _require_complete(store, run_id)
    latents = load_latents(store.run_dir(run_id) / "latents")
    dim = latents.latent_dim
    lines = ["segment_id," + ",".join(f"dim_{i}" for i in range(dim))]
    data32 = latents.vectors.astype(np.float32)
    for sid, row in zip(latents.segment_ids, data32):
        lines.append(sid + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def export_latents_json(store: RunStore, run_id: str) -> dict:
    return build_latents_payload(store, run_id)
