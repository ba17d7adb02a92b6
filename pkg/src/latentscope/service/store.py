"""Persisted runs: content-hashed ids, atomic publication, dataset registry.

A run directory is built in a temp sibling and renamed into place, so
readers never observe partial runs; completed directories are never
mutated.  Run ids are content hashes of the dataset fingerprint plus
all configs, which makes repeated submissions cache hits.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..analysis import ClusterParams
from ..encoders import EncoderConfig
from ..ingest import archive_fingerprint, load_archive, load_taxonomy
from ..projection import ProjectionConfig


class StoreError(ValueError):
    pass


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def compute_run_id(
    dataset_fingerprint: str,
    encoder: EncoderConfig,
    projection: ProjectionConfig,
    clustering: ClusterParams,
) -> str:
    blob = canonical_json(
        {
            "dataset": dataset_fingerprint,
            "encoder": encoder.to_dict(),
            "projection": projection.to_dict(),
            "cluster": clustering.to_dict(),
        }
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunManifest:
    run_id: str
    dataset_name: str
    dataset_fingerprint: str
    encoder: dict
    projection: dict
    cluster: dict
    status: str = "pending"  # pending | complete | failed
    created_at: str = ""
    artifacts: dict = field(default_factory=dict)
    train_summary: dict = field(default_factory=dict)
    validation: Optional[dict] = None
    error: Optional[str] = None
    failed_stage: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


def write_json_atomic(path: Union[str, Path], payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


class RunStore:
    """Workspace root holding the dataset registry, runs, and comparisons."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    # -- datasets -----------------------------------------------------------

    @property
    def registry_path(self) -> Path:
        return self.root / "datasets.json"

    def _read_registry(self) -> dict:
        if not self.registry_path.exists():
            return {}
        return json.loads(self.registry_path.read_text(encoding="utf-8"))

    def register_dataset(self, name: str, archive_dir: Union[str, Path],
                         taxonomy_path: Union[str, Path]) -> str:
        archive_dir = Path(archive_dir).resolve()
        taxonomy_path = Path(taxonomy_path).resolve()
        fingerprint = archive_fingerprint(archive_dir)
        with self._lock:
            registry = self._read_registry()
            registry[name] = {
                "archive": str(archive_dir),
                "taxonomy": str(taxonomy_path),
                "fingerprint": fingerprint,
            }
            write_json_atomic(self.registry_path, registry)
        return fingerprint

    def datasets(self) -> dict:
        return self._read_registry()

    def dataset_entry(self, name: str) -> dict:
        registry = self._read_registry()
        if name not in registry:
            raise StoreError(f"unknown dataset {name!r}")
        return registry[name]

    def load_dataset(self, name: str):
        entry = self.dataset_entry(name)
        segset = load_archive(entry["archive"])
        taxonomy = load_taxonomy(entry["taxonomy"])
        return segset, taxonomy, entry["fingerprint"]

    # -- runs ---------------------------------------------------------------

    @property
    def runs_root(self) -> Path:
        return self.root / "runs"

    def run_dir(self, run_id: str) -> Path:
        return self.runs_root / run_id

    def manifest_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "manifest.json"

    def read_manifest(self, run_id: str) -> Optional[RunManifest]:
        path = self.manifest_path(run_id)
        if not path.exists():
            return None
        return RunManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_runs(self) -> list[RunManifest]:
        if not self.runs_root.exists():
            return []
        out = []
        for sub in sorted(self.runs_root.iterdir()):
            if sub.is_dir() and (sub / "manifest.json").exists():
                out.append(
                    RunManifest.from_dict(
                        json.loads((sub / "manifest.json").read_text(encoding="utf-8"))
                    )
                )
        return out

    def stage_dir(self, run_id: str) -> Path:
        """Temp build directory, renamed into place by publish()."""
        tmp = self.runs_root / f".tmp-{run_id}-{os.getpid()}-{time.monotonic_ns()}"
        tmp.mkdir(parents=True, exist_ok=True)
        return tmp

    def publish(self, run_id: str, staged: Path) -> None:
        target = self.run_dir(run_id)
        with self._lock:
            if target.exists():
                manifest = self.read_manifest(run_id)
                if manifest is not None and manifest.status == "complete":
                    _rmtree(staged)
                    return
                _rmtree(target)
            os.replace(staged, target)

    # -- comparisons --------------------------------------------------------

    @property
    def comparisons_root(self) -> Path:
        return self.root / "comparisons"

    def comparison_dir(self, run_a: str, run_b: str) -> Path:
        return self.comparisons_root / f"{run_a}__{run_b}"


def _rmtree(path: Path) -> None:
    import shutil

    shutil.rmtree(path, ignore_errors=True)
