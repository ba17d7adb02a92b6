"""HTTP/JSON API over the run store.

Reads are served straight from published run directories (safe during
writes thanks to write-then-rename publication).  Run creation goes
through a single-worker queue so trainings never contend for CPU.
"""

from __future__ import annotations

import queue
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from ..analysis import ClusterParams
from ..encoders import EncoderConfig
from ..projection import ProjectionConfig
from .payloads import (
    build_compare_payload,
    build_latents_payload,
    build_map_payload,
    build_metrics_payload,
    build_tree_payload,
    export_latents_csv,
    export_latents_json,
)
from .pipeline import compare_runs, run_pipeline
from .store import RunStore, StoreError, compute_run_id


class RunRequest(BaseModel):
    dataset: str
    encoder: dict = Field(default_factory=dict)
    projection: dict = Field(default_factory=dict)
    cluster: dict = Field(default_factory=dict)


class CompareRequest(BaseModel):
    run_a: str
    run_b: str
    k: int = 10
    alignment: str = "none"


class PipelineWorker:
    """Serializes pipeline executions on a background thread."""

    def __init__(self, store: RunStore):
        self.store = store
        self.queue: queue.Queue = queue.Queue()
        self.pending: dict[str, str] = {}
        self.lock = threading.Lock()
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self.thread.start()

    def submit(self, run_id: str, job) -> None:
        with self.lock:
            if run_id in self.pending:
                return
            self.pending[run_id] = "pending"
        self.queue.put((run_id, job))

    def status(self, run_id: str) -> Optional[str]:
        with self.lock:
            return self.pending.get(run_id)

    def _loop(self) -> None:
        while True:
            run_id, job = self.queue.get()
            try:
                job()
            except Exception:  # noqa: BLE001 - failures live in the manifest
                pass
            finally:
                with self.lock:
                    self.pending.pop(run_id, None)
                self.queue.task_done()


def _parse_configs(req: RunRequest):
    try:
        enc = dict(req.encoder)
        enc.setdefault("kind", "tft")
        encoder = EncoderConfig.from_dict(enc)
        projection = ProjectionConfig.from_dict(req.projection)
        cluster_params = ClusterParams.from_dict(req.cluster)
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return encoder, projection, cluster_params


def create_app(runs_root: str | Path, static_dir: Optional[str | Path] = None) -> FastAPI:
    store = RunStore(runs_root)
    worker = PipelineWorker(store)
    app = FastAPI(title="latentscope", version="0.1.0")

    @app.exception_handler(StoreError)
    async def _store_error(_request, exc: StoreError):
        from fastapi.responses import JSONResponse

        status = 404 if "unknown" in str(exc) else 409
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/datasets")
    def list_datasets():
        out = []
        for name, entry in sorted(store.datasets().items()):
            item = {"name": name, "fingerprint": entry["fingerprint"]}
            try:
                segset, _t, _f = store.load_dataset(name)
                item["n_segments"] = len(segset)
            except Exception:  # noqa: BLE001 - registry may point at moved files
                pass
            out.append(item)
        return {"datasets": out}

    @app.get("/datasets/{name}/tree")
    def dataset_tree(name: str):
        return build_tree_payload(store, name)

    @app.post("/runs", status_code=202)
    def submit_run(req: RunRequest):
        encoder, projection, cluster_params = _parse_configs(req)
        try:
            segset, _t, fingerprint = store.load_dataset(req.dataset)
        except StoreError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        resolved = encoder.resolve(segset.seg_len)
        run_id = compute_run_id(fingerprint, resolved, projection, cluster_params)
        manifest = store.read_manifest(run_id)
        if manifest is not None and manifest.status == "complete":
            return {"run_id": run_id, "status": "complete"}
        worker.submit(
            run_id,
            lambda: run_pipeline(store, req.dataset, encoder, projection, cluster_params),
        )
        return {"run_id": run_id, "status": "pending"}

    @app.get("/runs")
    def list_runs():
        return {"runs": [m.to_dict() for m in store.list_runs()]}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        manifest = store.read_manifest(run_id)
        if manifest is None:
            if worker.status(run_id) is not None:
                return {"run_id": run_id, "status": "pending"}
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return manifest.to_dict()

    @app.get("/runs/{run_id}/map")
    def run_map(run_id: str):
        return build_map_payload(store, run_id)

    @app.get("/runs/{run_id}/latents")
    def run_latents(run_id: str, ids: Optional[str] = Query(default=None)):
        wanted = [s for s in ids.split(",") if s] if ids else None
        return build_latents_payload(store, run_id, wanted)

    @app.get("/runs/{run_id}/metrics")
    def run_metrics(run_id: str):
        return build_metrics_payload(store, run_id)

    @app.get("/runs/{run_id}/export")
    def run_export(run_id: str, format: str = Query(default="csv")):
        if format == "csv":
            return PlainTextResponse(
                export_latents_csv(store, run_id), media_type="text/csv"
            )
        if format == "json":
            return export_latents_json(store, run_id)
        raise HTTPException(status_code=400, detail=f"unknown format {format!r}")

    @app.post("/compare")
    def submit_compare(req: CompareRequest):
        if req.alignment not in ("none", "procrustes"):
            raise HTTPException(
                status_code=400, detail=f"unknown alignment {req.alignment!r}"
            )
        compare_runs(store, req.run_a, req.run_b, k=req.k, alignment=req.alignment)
        return build_compare_payload(store, req.run_a, req.run_b)

    @app.get("/compare/{run_a}/{run_b}")
    def get_compare(run_a: str, run_b: str):
        payload = build_compare_payload(store, run_a, run_b)
        if payload is None:
            raise HTTPException(
                status_code=404, detail=f"no comparison for {run_a}/{run_b}"
            )
        return payload

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(static_dir), html=True), name="app")

    app.state.store = store
    app.state.worker = worker
    return app


def serve(address: str, runs_root: str | Path,
          static_dir: Optional[str | Path] = None) -> None:
    """Run the API under uvicorn (blocking)."""
    import uvicorn

    host, _, port = address.partition(":")
    app = create_app(runs_root, static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")
