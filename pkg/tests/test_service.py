"""Run store, pipeline orchestration, and HTTP API behavior."""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from jsonschema import validate

from latentscope.analysis import ClusterParams
from latentscope.encoders import EncoderConfig
from latentscope.projection import ProjectionConfig
from latentscope.service import (
    StoreError,
    compare_runs,
    compute_run_id,
    create_app,
    export_latents_csv,
    run_benchmark,
    run_pipeline,
)
from latentscope.service.schemas import SCHEMAS

from conftest import SMALL_ENCODER

PCA = ProjectionConfig(method="pca")
GMM3 = ClusterParams(method="gmm", k=3, seed=1)


def _encoder(**overrides):
    return EncoderConfig.from_dict({**SMALL_ENCODER, **overrides})


@pytest.fixture(scope="module")
def completed_run(small_store):
    manifest = run_pipeline(small_store, "small", _encoder(), PCA, GMM3)
    assert manifest.status == "complete", manifest.error
    return manifest


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def test_pipeline_completes_with_validation(completed_run):
    assert completed_run.validation is not None
    assert completed_run.validation["n_clusters"] >= 2
    assert completed_run.train_summary["epochs_completed"] == 4


def test_pipeline_idempotent(small_store, completed_run):
    t0 = time.perf_counter()
    again = run_pipeline(small_store, "small", _encoder(), PCA, GMM3)
    elapsed = time.perf_counter() - t0
    assert again.run_id == completed_run.run_id
    assert again.created_at == completed_run.created_at
    assert elapsed < 1.0  # cache hit, no retraining


def test_completed_run_files_never_mutated(small_store, completed_run):
    run_dir = small_store.run_dir(completed_run.run_id)
    before = {
        p.name: p.read_bytes() for p in run_dir.iterdir() if p.is_file()
    }
    run_pipeline(small_store, "small", _encoder(), PCA, GMM3)
    after = {p.name: p.read_bytes() for p in run_dir.iterdir() if p.is_file()}
    assert before == after


def test_run_id_pure_function_of_inputs(small_store):
    enc = _encoder().resolve(250)
    a = compute_run_id("fp", enc, PCA, GMM3)
    b = compute_run_id("fp", EncoderConfig.from_dict(enc.to_dict()), PCA, GMM3)
    assert a == b
    c = compute_run_id("fp2", enc, PCA, GMM3)
    assert a != c


def test_invalid_perplexity_fails_projection_stage(small_store):
    bad = ProjectionConfig(method="tsne", perplexity=100.0)
    manifest = run_pipeline(small_store, "small", _encoder(seed=77), bad, GMM3)
    assert manifest.status == "failed"
    assert manifest.failed_stage == "projection"
    assert "perplexity" in manifest.error


def test_failed_run_recomputed_not_cached(small_store):
    bad = ProjectionConfig(method="tsne", perplexity=100.0)
    first = run_pipeline(small_store, "small", _encoder(seed=78), bad, GMM3)
    second = run_pipeline(small_store, "small", _encoder(seed=78), bad, GMM3)
    assert first.status == second.status == "failed"
    assert first.created_at != second.created_at  # actually re-ran


def test_unknown_dataset(small_store):
    with pytest.raises(StoreError, match="unknown dataset"):
        run_pipeline(small_store, "nope", _encoder(), PCA, GMM3)


# ---------------------------------------------------------------------------
# comparisons
# ---------------------------------------------------------------------------

def test_compare_run_with_itself(small_store, completed_run):
    payload = compare_runs(
        small_store, completed_run.run_id, completed_run.run_id, k=5
    )
    assert payload["agreement"]["mean_percent"] == pytest.approx(100.0)
    disp = np.asarray(payload["correspondence"]["displacements"])
    assert np.all(disp == 0.0)


def test_compare_dataset_mismatch(small_store, completed_run, tmp_path):
    from latentscope.ingest import (
        SyntheticSpec,
        default_classes,
        generate_synthetic_dataset,
        ingest_dataset,
        save_archive,
    )

    spec = SyntheticSpec(n_records=12, channels=6, sample_rate_hz=500.0,
                         record_duration_s=0.5, classes=default_classes(), seed=99)
    data = tmp_path / "other"
    generate_synthetic_dataset(spec, data)
    segset = ingest_dataset(data / "records", data / "taxonomy.tsv",
                            data / "labels.tsv", seg_seconds=0.5)
    arch = small_store.root / "datasets" / "other"
    save_archive(segset, arch)
    small_store.register_dataset("other", arch, data / "taxonomy.tsv")
    other = run_pipeline(small_store, "other", _encoder(seed=6), PCA,
                         ClusterParams(method="gmm", k=2, seed=1))
    assert other.status == "complete", other.error
    with pytest.raises(StoreError, match="dataset mismatch"):
        compare_runs(small_store, completed_run.run_id, other.run_id)


def test_compare_two_encoders(small_store, completed_run):
    second = run_pipeline(
        small_store, "small",
        _encoder(kind="vae_conv", conv_channels=(8, 8, 8), model_input_len=128,
                 latent_dim=4),
        PCA, GMM3,
    )
    assert second.status == "complete", second.error
    payload = compare_runs(small_store, completed_run.run_id, second.run_id, k=4)
    assert 0.0 <= payload["agreement"]["mean_percent"] <= 100.0
    stored = small_store.comparison_dir(completed_run.run_id, second.run_id)
    assert (stored / "agreement.json").exists()
    assert (stored / "correspondence.json").exists()


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def test_benchmark_single_cell(small_store, tmp_path):
    rows = run_benchmark(
        small_store, "small", kinds=["tft"], latent_dims=[8],
        epochs=1, seed=0, out_dir=tmp_path / "bench",
    )
    assert len(rows) == 1
    assert rows[0]["status"] == "ok"
    assert rows[0]["wall_time_s"] > 0
    table = (tmp_path / "bench" / "bench.csv").read_text()
    assert table.splitlines()[0].startswith("kind,latent_dim")
    assert len(table.strip().splitlines()) == 2


# ---------------------------------------------------------------------------
# HTTP API
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def client(small_store, completed_run):
    app = create_app(small_store.root)
    # reuse the store with the session's registered datasets
    app.state.store = small_store
    return TestClient(app)


def test_api_datasets(client):
    res = client.get("/datasets")
    assert res.status_code == 200
    validate(res.json(), SCHEMAS["datasets"])
    names = [d["name"] for d in res.json()["datasets"]]
    assert "small" in names


def test_api_runs_listing(client, completed_run):
    res = client.get("/runs")
    assert res.status_code == 200
    validate(res.json(), SCHEMAS["runs"])
    ids = [r["run_id"] for r in res.json()["runs"]]
    assert completed_run.run_id in ids


def test_api_get_run(client, completed_run):
    res = client.get(f"/runs/{completed_run.run_id}")
    assert res.status_code == 200
    validate(res.json(), SCHEMAS["run"])


def test_api_unknown_run_404(client):
    res = client.get("/runs/doesnotexist")
    assert res.status_code == 404
    validate(res.json(), SCHEMAS["error"])


def test_api_map_payload(client, completed_run):
    res = client.get(f"/runs/{completed_run.run_id}/map")
    assert res.status_code == 200
    payload = res.json()
    validate(payload, SCHEMAS["map"])
    assert len(payload["points"]) == 18
    labels = {code for p in payload["points"] for code in p["labels"]}
    assert labels  # synthetic classes carry codes


def test_api_latents_subset(client, completed_run):
    full = client.get(f"/runs/{completed_run.run_id}/latents").json()
    validate(full, SCHEMAS["latents"])
    two = full["ids"][:2]
    res = client.get(
        f"/runs/{completed_run.run_id}/latents", params={"ids": ",".join(two)}
    )
    subset = res.json()
    validate(subset, SCHEMAS["latents"])
    assert subset["ids"] == two
    assert subset["vectors"] == full["vectors"][:2]


def test_api_metrics(client, completed_run):
    res = client.get(f"/runs/{completed_run.run_id}/metrics")
    assert res.status_code == 200
    validate(res.json(), SCHEMAS["metrics"])


def test_api_tree(client):
    res = client.get("/datasets/small/tree")
    assert res.status_code == 200
    payload = res.json()
    validate(payload, SCHEMAS["tree"])
    assert "SAG" in payload["codes"]
    n = len(payload["codes"])
    assert len(payload["cooccurrence"]) == n


def test_api_submit_poll_cycle(client, small_store):
    body = {
        "dataset": "small",
        "encoder": {**SMALL_ENCODER, "seed": 123},
        "projection": {"method": "pca"},
        "cluster": {"method": "gmm", "k": 3, "seed": 1},
    }
    res = client.post("/runs", json=body)
    assert res.status_code == 202
    validate(res.json(), SCHEMAS["run_submitted"])
    run_id = res.json()["run_id"]
    deadline = time.time() + 60
    status = res.json()["status"]
    while status == "pending" and time.time() < deadline:
        time.sleep(0.3)
        poll = client.get(f"/runs/{run_id}")
        assert poll.status_code == 200
        status = poll.json()["status"]
    assert status == "complete"
    # resubmission is an instant cache hit
    res2 = client.post("/runs", json=body)
    assert res2.json() == {"run_id": run_id, "status": "complete"}


def test_api_submit_validation_error(client):
    res = client.post("/runs", json={"dataset": "small",
                                     "encoder": {"kind": "bogus"}})
    assert res.status_code == 400
    validate(res.json(), SCHEMAS["error"])


def test_api_compare_and_fetch(client, small_store, completed_run):
    second = run_pipeline(
        small_store, "small",
        _encoder(kind="vae_conv", conv_channels=(8, 8, 8), model_input_len=128,
                 latent_dim=4),
        PCA, GMM3,
    )
    res = client.post(
        "/compare",
        json={"run_a": completed_run.run_id, "run_b": second.run_id, "k": 4},
    )
    assert res.status_code == 200
    validate(res.json(), SCHEMAS["comparison"])
    res2 = client.get(f"/compare/{completed_run.run_id}/{second.run_id}")
    assert res2.status_code == 200
    validate(res2.json(), SCHEMAS["comparison"])


def test_api_export_csv_round_trip(client, small_store, completed_run):
    res = client.get(f"/runs/{completed_run.run_id}/export",
                     params={"format": "csv"})
    assert res.status_code == 200
    text = res.text
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    assert header[0] == "segment_id"
    assert header[1] == "dim_0"

    raw = (small_store.run_dir(completed_run.run_id) / "latents" /
           "latents.bin").read_bytes()
    stored = np.frombuffer(raw, dtype="<f4").reshape(len(lines) - 1, len(header) - 1)
    parsed = np.array(
        [[np.float32(float(v)) for v in line.split(",")[1:]] for line in lines[1:]],
        dtype=np.float32,
    )
    assert np.array_equal(parsed, stored)


def test_api_export_json(client, completed_run):
    res = client.get(f"/runs/{completed_run.run_id}/export",
                     params={"format": "json"})
    assert res.status_code == 200
    validate(res.json(), SCHEMAS["export_json"])


def test_api_export_bad_format(client, completed_run):
    res = client.get(f"/runs/{completed_run.run_id}/export",
                     params={"format": "xml"})
    assert res.status_code == 400


def test_export_csv_helper_matches_endpoint(client, small_store, completed_run):
    helper = export_latents_csv(small_store, completed_run.run_id)
    res = client.get(f"/runs/{completed_run.run_id}/export",
                     params={"format": "csv"})
    assert res.text == helper
