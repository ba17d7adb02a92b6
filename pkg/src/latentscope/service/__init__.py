"""Run persistence, pipeline orchestration, and the HTTP API."""

from .api import create_app, serve
from .payloads import (
    build_compare_payload,
    build_latents_payload,
    build_map_payload,
    build_metrics_payload,
    build_tree_payload,
    export_latents_csv,
    export_latents_json,
)
from .pipeline import (
    compare_runs,
    load_cluster_assignment,
    read_comparison,
    run_benchmark,
    run_pipeline,
    stage_cluster,
    stage_project,
    stage_train,
    stage_validate,
)
from .store import (
    RunManifest,
    RunStore,
    StoreError,
    compute_run_id,
    write_json_atomic,
)

__all__ = [
    "RunManifest",
    "RunStore",
    "StoreError",
    "build_compare_payload",
    "build_latents_payload",
    "build_map_payload",
    "build_metrics_payload",
    "build_tree_payload",
    "compare_runs",
    "compute_run_id",
    "create_app",
    "export_latents_csv",
    "export_latents_json",
    "load_cluster_assignment",
    "read_comparison",
    "run_benchmark",
    "run_pipeline",
    "serve",
    "stage_cluster",
    "stage_project",
    "stage_train",
    "stage_validate",
    "write_json_atomic",
]
