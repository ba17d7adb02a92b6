"""Pipeline orchestration: staged runs, comparisons, and benchmarks."""

from __future__ import annotations

import datetime
import json
import time
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..analysis import (
    ClusterParams,
    cluster,
    cluster_agreement,
    correspondence,
    internal_validation,
)
from ..analysis.clustering import ClusterAssignment
from ..encoders import (
    EncoderConfig,
    extract_latents,
    load_latents,
    save_checkpoint,
    save_latents,
    train_new,
)
from ..ingest import SegmentSet
from ..projection import (
    Projection2D,
    ProjectionConfig,
    load_projection,
    project,
    save_projection,
)
from .store import (
    RunManifest,
    RunStore,
    StoreError,
    canonical_json,
    compute_run_id,
    write_json_atomic,
)

CLUSTERS_NAME = "clusters.json"
PROJ_NAME = "proj.json"
VALIDATION_NAME = "validation.json"
TRAIN_REPORT_NAME = "train_report.json"


# ---------------------------------------------------------------------------
# stage functions (shared by the service pipeline and the CLI commands)
# ---------------------------------------------------------------------------

def stage_train(segset: SegmentSet, encoder_cfg: EncoderConfig, out_dir: Path,
                fingerprint: str = ""):
    cfg = encoder_cfg.resolve(segset.seg_len)
    model, report = train_new(cfg, segset, fingerprint)
    latents = extract_latents(model, segset)
    save_checkpoint(model, out_dir / "checkpoint")
    save_latents(latents, out_dir / "latents")
    write_json_atomic(out_dir / TRAIN_REPORT_NAME, report.to_dict())
    return model, report, latents


def stage_project(run_dir: Path, projection_cfg: ProjectionConfig) -> Projection2D:
    latents = load_latents(run_dir / "latents")
    proj = project(latents, projection_cfg)
    save_projection(proj, run_dir / PROJ_NAME)
    return proj


def stage_cluster(run_dir: Path, params: ClusterParams) -> ClusterAssignment:
    proj = load_projection(run_dir / PROJ_NAME)
    assignment = cluster(proj.coords, params, proj.segment_ids)
    write_json_atomic(
        run_dir / CLUSTERS_NAME,
        {
            "segment_ids": assignment.segment_ids,
            "labels": assignment.labels.tolist(),
            "params": params.to_dict(),
            "eps_used": assignment.eps_used,
            "n_clusters": assignment.n_clusters,
            "n_noise": assignment.n_noise,
        },
    )
    return assignment


def load_cluster_assignment(run_dir: Path) -> ClusterAssignment:
    payload = json.loads((run_dir / CLUSTERS_NAME).read_text(encoding="utf-8"))
    return ClusterAssignment(
        segment_ids=payload["segment_ids"],
        labels=np.asarray(payload["labels"], dtype=np.int64),
        params=ClusterParams.from_dict(payload["params"]),
        eps_used=payload.get("eps_used"),
    )


def stage_validate(run_dir: Path):
    proj = load_projection(run_dir / PROJ_NAME)
    assignment = load_cluster_assignment(run_dir)
    report = internal_validation(proj.coords, assignment)
    write_json_atomic(run_dir / VALIDATION_NAME, report.to_dict())
    return report


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def run_pipeline(
    store: RunStore,
    dataset_name: str,
    encoder_cfg: EncoderConfig,
    projection_cfg: ProjectionConfig,
    cluster_params: ClusterParams,
) -> RunManifest:
    """train -> extract -> project -> cluster -> validate, persisted.

    Idempotent: an existing complete run with the same id is returned
    without recomputation.  Failures produce a manifest whose
    failed_stage names the stage that raised.
    """
    segset, _taxonomy, fingerprint = store.load_dataset(dataset_name)
    encoder_cfg = encoder_cfg.resolve(segset.seg_len)
    run_id = compute_run_id(fingerprint, encoder_cfg, projection_cfg, cluster_params)

    existing = store.read_manifest(run_id)
    if existing is not None and existing.status == "complete":
        return existing

    manifest = RunManifest(
        run_id=run_id,
        dataset_name=dataset_name,
        dataset_fingerprint=fingerprint,
        encoder=encoder_cfg.to_dict(),
        projection=projection_cfg.to_dict(),
        cluster=cluster_params.to_dict(),
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
    staged = store.stage_dir(run_id)
    stage = "train"
    try:
        _model, report, _latents = stage_train(segset, encoder_cfg, staged, fingerprint)
        manifest.train_summary = {
            "wall_time_s": report.wall_time_s,
            "epochs_completed": report.epochs_completed,
            "final_loss": report.epoch_loss[-1] if report.epoch_loss else None,
            "first_loss": report.epoch_loss[0] if report.epoch_loss else None,
        }
        stage = "projection"
        stage_project(staged, projection_cfg)
        stage = "cluster"
        stage_cluster(staged, cluster_params)
        stage = "validation"
        validation = stage_validate(staged)
        manifest.validation = validation.to_dict()
    except Exception as exc:  # noqa: BLE001 - every stage error becomes a manifest
        manifest.status = "failed"
        manifest.failed_stage = stage
        manifest.error = f"{type(exc).__name__}: {exc}"
        write_json_atomic(staged / "manifest.json", manifest.to_dict())
        store.publish(run_id, staged)
        return manifest

    manifest.status = "complete"
    manifest.artifacts = {
        "checkpoint": "checkpoint",
        "latents": "latents",
        "projection": PROJ_NAME,
        "clusters": CLUSTERS_NAME,
        "validation": VALIDATION_NAME,
        "train_report": TRAIN_REPORT_NAME,
    }
    write_json_atomic(staged / "manifest.json", manifest.to_dict())
    store.publish(run_id, staged)
    return store.read_manifest(run_id)


def compare_runs(
    store: RunStore,
    run_a: str,
    run_b: str,
    k: int = 10,
    alignment: str = "none",
) -> dict:
    """Agreement + correspondence between two complete runs."""
    ma = store.read_manifest(run_a)
    mb = store.read_manifest(run_b)
    if ma is None or mb is None:
        raise StoreError(f"unknown run {run_a if ma is None else run_b!r}")
    if ma.status != "complete" or mb.status != "complete":
        raise StoreError("both runs must be complete to compare")
    if ma.dataset_fingerprint != mb.dataset_fingerprint:
        raise StoreError(
            "dataset mismatch: runs were computed on different datasets "
            f"({ma.dataset_fingerprint} vs {mb.dataset_fingerprint})"
        )
    proj_a = load_projection(store.run_dir(run_a) / PROJ_NAME)
    proj_b = load_projection(store.run_dir(run_b) / PROJ_NAME)
    clus_a = load_cluster_assignment(store.run_dir(run_a))
    clus_b = load_cluster_assignment(store.run_dir(run_b))

    agreement = cluster_agreement(proj_a, clus_a, proj_b, clus_b, k=k)
    corr = correspondence(proj_a, proj_b, alignment=alignment)
    payload = {
        "run_a": run_a,
        "run_b": run_b,
        "k": k,
        "alignment": alignment,
        "agreement": agreement.to_dict(),
        "correspondence": corr.to_dict(),
    }
    out = store.comparison_dir(run_a, run_b)
    write_json_atomic(out / "agreement.json", payload["agreement"])
    write_json_atomic(out / "correspondence.json", payload["correspondence"])
    write_json_atomic(
        out / "comparison.json",
        {"run_a": run_a, "run_b": run_b, "k": k, "alignment": alignment},
    )
    return payload


def read_comparison(store: RunStore, run_a: str, run_b: str) -> Optional[dict]:
    out = store.comparison_dir(run_a, run_b)
    if not (out / "comparison.json").exists():
        return None
    meta = json.loads((out / "comparison.json").read_text(encoding="utf-8"))
    return {
        "run_a": run_a,
        "run_b": run_b,
        "k": meta["k"],
        "alignment": meta["alignment"],
        "agreement": json.loads((out / "agreement.json").read_text(encoding="utf-8")),
        "correspondence": json.loads(
            (out / "correspondence.json").read_text(encoding="utf-8")
        ),
    }


def run_benchmark(
    store: RunStore,
    dataset_name: str,
    kinds: Sequence[str],
    latent_dims: Sequence[int],
    epochs: int = 3,
    seed: int = 0,
    out_dir: Optional[Union[str, Path]] = None,
) -> list[dict]:
    """Train each (kind, D) with identical epochs/seed; measure wall time.

    Emits a CSV table and a JSON report under out_dir when given.
    """
    segset, _tax, fingerprint = store.load_dataset(dataset_name)
    rows = []
    for kind in kinds:
        for dim in latent_dims:
            cfg = EncoderConfig(kind=kind, latent_dim=int(dim), epochs=epochs, seed=seed)
            row = {"kind": kind, "latent_dim": int(dim), "epochs": epochs, "seed": seed}
            try:
                t0 = time.perf_counter()
                _model, report = train_new(cfg, segset, fingerprint)
                row["wall_time_s"] = time.perf_counter() - t0
                row["train_wall_time_s"] = report.wall_time_s
                row["final_loss"] = report.epoch_loss[-1] if report.epoch_loss else None
                row["status"] = "ok"
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                row["status"] = "error"
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = "kind,latent_dim,epochs,seed,wall_time_s,final_loss,status"
        lines = [header]
        for r in rows:
            lines.append(
                f"{r['kind']},{r['latent_dim']},{r['epochs']},{r['seed']},"
                f"{r.get('wall_time_s', '')},{r.get('final_loss', '')},{r['status']}"
            )
        (out / "bench.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_json_atomic(
            out / "bench.json",
            {"dataset": dataset_name, "fingerprint": fingerprint, "rows": rows},
        )
    return rows
