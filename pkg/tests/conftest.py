"""Shared fixtures: a small registered dataset and completed runs."""

import pytest

from latentscope.ingest import (
    SyntheticSpec,
    default_classes,
    generate_synthetic_dataset,
    ingest_dataset,
    save_archive,
)
from latentscope.service import RunStore


SMALL_DATASET_SPEC = SyntheticSpec(
    n_records=18,
    channels=6,
    sample_rate_hz=500.0,
    record_duration_s=0.5,
    classes=default_classes(),
    noise_std=0.02,
    seed=42,
)

SMALL_ENCODER = {
    "kind": "tft",
    "latent_dim": 4,
    "model_input_len": 64,
    "d_model": 16,
    "n_heads": 2,
    "n_layers": 1,
    "epochs": 4,
    "seed": 5,
}


@pytest.fixture(scope="session")
def small_store(tmp_path_factory):
    """Workspace with one registered 18-segment synthetic dataset."""
    root = tmp_path_factory.mktemp("workspace")
    data = root / "data"
    generate_synthetic_dataset(SMALL_DATASET_SPEC, data)
    segset = ingest_dataset(
        data / "records",
        data / "taxonomy.tsv",
        data / "labels.tsv",
        seg_seconds=0.5,
    )
    store = RunStore(root / "ws")
    archive = store.root / "datasets" / "small"
    save_archive(segset, archive)
    store.register_dataset("small", archive, data / "taxonomy.tsv")
    return store
