"""Command-line interface.

Typical flow:

    latentscope synth --data-dir data/
    latentscope ingest --name demo --records data/records \\
        --taxonomy data/taxonomy.tsv --labels data/labels.tsv
    latentscope train --dataset demo --encoder '{"kind": "tft", "latent_dim": 8}'
    latentscope project --run-dir <dir> ; latentscope cluster --run-dir <dir>
    latentscope validate --run-dir <dir> --dataset demo
    latentscope compare --run-a <dir> --run-b <dir>
    latentscope bench --dataset demo --dims 8,64
    latentscope serve --address 127.0.0.1:8321

Report-producing commands (validate, compare, bench) render a figure
next to their delimited/JSON outputs.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from .analysis import ClusterParams, cluster_agreement, correspondence
from .encoders import EncoderConfig, load_latents
from .ingest import (
    ClassSpec,
    SyntheticSpec,
    default_classes,
    generate_synthetic_dataset,
    ingest_dataset,
    save_archive,
)
from .projection import ProjectionConfig, load_projection
from .service import (
    RunStore,
    run_benchmark,
    stage_cluster,
    stage_project,
    stage_train,
    stage_validate,
)
from .service.pipeline import PROJ_NAME, load_cluster_assignment
from .service.store import write_json_atomic
from . import report


def _load_config_file(path):
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _merge(section: dict, override_json: str | None, seed) -> dict:
    merged = dict(section)
    if override_json:
        merged.update(json.loads(override_json))
    if seed is not None:
        merged["seed"] = seed
    return merged


@click.group()
@click.option("--out", "workspace", default="latentscope-workspace",
              show_default=True, help="Workspace root for datasets, runs, reports.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="JSON file with encoder/projection/cluster/synth defaults.")
@click.option("--seed", default=None, type=int, help="Override every config seed.")
@click.pass_context
def main(ctx, workspace, config_path, seed):
    """Latent-space analytics for multivariate time-series events."""
    ctx.ensure_object(dict)
    ctx.obj["workspace"] = Path(workspace)
    ctx.obj["config"] = _load_config_file(config_path)
    ctx.obj["seed"] = seed


@main.command()
@click.option("--data-dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--records", "n_records", default=150, show_default=True, type=int)
@click.option("--channels", default=6, show_default=True, type=int)
@click.option("--rate", default=2000.0, show_default=True, type=float)
@click.option("--duration", default=1.0, show_default=True, type=float)
@click.option("--noise", default=0.02, show_default=True, type=float)
@click.option("--no-classes", is_flag=True, help="Pure sinusoids, no disturbances.")
@click.pass_context
def synth(ctx, data_dir, n_records, channels, rate, duration, noise, no_classes):
    """Generate a synthetic event dataset (records + taxonomy + labels)."""
    section = _merge(ctx.obj["config"].get("synth", {}), None, ctx.obj["seed"])
    classes = () if no_classes else default_classes()
    if "classes" in section:
        classes = tuple(
            ClassSpec(
                label_codes=tuple(c["label_codes"]),
                kind=c["kind"],
                magnitude=c["magnitude"],
                duration_range_s=tuple(c.get("duration_range_s", (0.2, 0.5))),
            )
            for c in section["classes"]
        )
    spec = SyntheticSpec(
        n_records=n_records,
        channels=channels,
        sample_rate_hz=rate,
        record_duration_s=duration,
        classes=classes,
        noise_std=noise,
        seed=section.get("seed", 0),
    )
    out = generate_synthetic_dataset(spec, data_dir)
    click.echo(f"wrote {n_records} records under {out}")


@main.command()
@click.option("--name", required=True, help="Dataset name in the registry.")
@click.option("--records", "records_dir", required=True, type=click.Path(exists=True))
@click.option("--taxonomy", "taxonomy_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", default=None, type=click.Path(exists=True))
@click.option("--seg-seconds", default=1.0, show_default=True, type=float)
@click.option("--resample-hz", default=None, type=float)
@click.option("--threshold-k", default=5.0, show_default=True, type=float)
@click.pass_context
def ingest(ctx, name, records_dir, taxonomy_path, labels_path, seg_seconds,
           resample_hz, threshold_k):
    """Preprocess raw records into a registered segment archive."""
    store = RunStore(ctx.obj["workspace"])
    segset = ingest_dataset(
        records_dir,
        taxonomy_path,
        labels_path,
        seg_seconds=seg_seconds,
        resample_hz=resample_hz,
        threshold_k=threshold_k,
    )
    archive_dir = store.root / "datasets" / name
    save_archive(segset, archive_dir)
    fingerprint = store.register_dataset(name, archive_dir, taxonomy_path)
    click.echo(
        f"registered {name}: {len(segset)} segments x {segset.n_channels} channels "
        f"x {segset.seg_len} samples (fingerprint {fingerprint})"
    )


def _default_run_dir(workspace: Path, dataset: str, cfg: EncoderConfig) -> Path:
    tag = hashlib.sha256(
        json.dumps(cfg.to_dict(), sort_keys=True).encode()
    ).hexdigest()[:8]
    return workspace / "stages" / f"{dataset}_{cfg.kind}_{tag}"


@main.command()
@click.option("--dataset", required=True)
@click.option("--encoder", "encoder_json", default=None,
              help='JSON, e.g. \'{"kind": "vae_conv", "latent_dim": 8}\'.')
@click.option("--run-dir", default=None, type=click.Path())
@click.pass_context
def train(ctx, dataset, encoder_json, run_dir):
    """Train an encoder on a registered dataset; write checkpoint + latents."""
    store = RunStore(ctx.obj["workspace"])
    section = _merge(ctx.obj["config"].get("encoder", {}), encoder_json, ctx.obj["seed"])
    section.setdefault("kind", "tft")
    cfg = EncoderConfig.from_dict(section)
    segset, _tax, fingerprint = store.load_dataset(dataset)
    cfg = cfg.resolve(segset.seg_len)
    out = Path(run_dir) if run_dir else _default_run_dir(ctx.obj["workspace"], dataset, cfg)
    out.mkdir(parents=True, exist_ok=True)
    _model, train_report, latents = stage_train(segset, cfg, out, fingerprint)
    write_json_atomic(out / "run_meta.json", {"dataset": dataset,
                                              "fingerprint": fingerprint})
    click.echo(
        f"trained {cfg.kind} D={cfg.latent_dim} in {train_report.wall_time_s:.1f}s "
        f"({len(latents.segment_ids)} latents) -> {out}"
    )


@main.command()
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--projection", "projection_json", default=None)
@click.pass_context
def project(ctx, run_dir, projection_json):
    """Project a run's latents to 2D (pca | tsne | umap)."""
    section = _merge(ctx.obj["config"].get("projection", {}), projection_json,
                     ctx.obj["seed"])
    cfg = ProjectionConfig.from_dict(section)
    proj = stage_project(Path(run_dir), cfg)
    click.echo(f"projected {len(proj.segment_ids)} points with {cfg.method}")


@main.command(name="cluster")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--cluster", "cluster_json", default=None)
@click.pass_context
def cluster_cmd(ctx, run_dir, cluster_json):
    """Cluster a run's 2D projection (dbscan | gmm | ahc)."""
    section = _merge(ctx.obj["config"].get("cluster", {}), cluster_json, ctx.obj["seed"])
    params = ClusterParams.from_dict(section)
    assignment = stage_cluster(Path(run_dir), params)
    extra = f", eps={assignment.eps_used:.4g}" if assignment.eps_used else ""
    click.echo(
        f"{params.method}: {assignment.n_clusters} clusters, "
        f"{assignment.n_noise} noise{extra}"
    )


@main.command()
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--dataset", default=None, help="Enrich the figure with durations/labels.")
@click.option("--figure/--no-figure", default=True, show_default=True)
@click.pass_context
def validate(ctx, run_dir, dataset, figure):
    """Internal validation metrics for a clustered run (+ map figure)."""
    run_dir = Path(run_dir)
    rep = stage_validate(run_dir)
    click.echo(
        f"silhouette {rep.silhouette:.4f}  calinski-harabasz "
        f"{rep.calinski_harabasz:.2f}  davies-bouldin {rep.davies_bouldin:.4f}  "
        f"clusters {rep.n_clusters}  noise {rep.n_noise}"
    )
    if figure:
        proj = load_projection(run_dir / PROJ_NAME)
        assignment = load_cluster_assignment(run_dir)
        durations = {sid: 0.0 for sid in proj.segment_ids}
        labels = {sid: [] for sid in proj.segment_ids}
        if dataset:
            store = RunStore(ctx.obj["workspace"])
            segset, taxonomy, _fp = store.load_dataset(dataset)
            for seg in segset.segments:
                durations[seg.segment_id] = seg.event_duration_s
                labels[seg.segment_id] = seg.labels.codes(taxonomy)
        payload = {
            "run_id": run_dir.name,
            "points": [
                {
                    "id": sid,
                    "x": float(x),
                    "y": float(y),
                    "cluster": int(lab),
                    "labels": labels[sid],
                    "duration_s": durations[sid],
                    "padded_fraction": 0.0,
                }
                for sid, (x, y), lab in zip(
                    proj.segment_ids, proj.coords, assignment.labels
                )
            ],
        }
        out = report.render_map_figure(payload, run_dir / "map.png")
        click.echo(f"figure -> {out}")


@main.command()
@click.option("--run-a", required=True, type=click.Path(exists=True))
@click.option("--run-b", required=True, type=click.Path(exists=True))
@click.option("--k", default=10, show_default=True, type=int)
@click.option("--alignment", default="none", show_default=True,
              type=click.Choice(["none", "procrustes"]))
@click.option("--out-dir", default=None, type=click.Path())
@click.pass_context
def compare(ctx, run_a, run_b, k, alignment, out_dir):
    """Agreement + correspondence between two staged runs (+ figure)."""
    run_a, run_b = Path(run_a), Path(run_b)
    pa = load_projection(run_a / PROJ_NAME)
    pb = load_projection(run_b / PROJ_NAME)
    ca = load_cluster_assignment(run_a)
    cb = load_cluster_assignment(run_b)
    agreement = cluster_agreement(pa, ca, pb, cb, k=k)
    corr = correspondence(pa, pb, alignment=alignment)

    out = Path(out_dir) if out_dir else (
        ctx.obj["workspace"] / "comparisons" / f"{run_a.name}__{run_b.name}"
    )
    out.mkdir(parents=True, exist_ok=True)
    write_json_atomic(out / "agreement.json", agreement.to_dict())
    write_json_atomic(out / "correspondence.json", corr.to_dict())
    index_a = {sid: i for i, sid in enumerate(pa.segment_ids)}
    index_b = {sid: i for i, sid in enumerate(pb.segment_ids)}
    shared = corr.segment_ids
    payload = {
        "agreement": agreement.to_dict(),
        "correspondence": corr.to_dict(),
        "coords_a": [pa.coords[index_a[s]].tolist() for s in shared],
        "coords_b": [pb.coords[index_b[s]].tolist() for s in shared],
    }
    fig = report.render_correspondence_figure(payload, out / "correspondence.png")
    click.echo(
        f"agreement {agreement.mean_percent:.2f}% (k={k}); "
        f"mean displacement {corr.mean_len:.4g} -> {out}"
    )
    click.echo(f"figure -> {fig}")


@main.command()
@click.option("--dataset", required=True)
@click.option("--kinds", default="tft,vae_conv,vae_lstm", show_default=True)
@click.option("--dims", default="8,64,256", show_default=True)
@click.option("--epochs", default=3, show_default=True, type=int)
@click.option("--out-dir", default=None, type=click.Path())
@click.pass_context
def bench(ctx, dataset, kinds, dims, epochs, out_dir):
    """Wall-time benchmark over (kind, latent_dim); CSV + JSON + figure."""
    store = RunStore(ctx.obj["workspace"])
    out = Path(out_dir) if out_dir else ctx.obj["workspace"] / "bench" / dataset
    rows = run_benchmark(
        store,
        dataset,
        [k.strip() for k in kinds.split(",") if k.strip()],
        [int(d) for d in dims.split(",") if d.strip()],
        epochs=epochs,
        seed=ctx.obj["seed"] if ctx.obj["seed"] is not None else 0,
        out_dir=out,
    )
    fig = report.render_benchmark_figure(rows, out / "runtime.png")
    for row in rows:
        status = row.get("wall_time_s")
        shown = f"{status:8.2f}s" if status is not None else f"   {row['status']}"
        click.echo(f"{row['kind']:9s} D={row['latent_dim']:4d} {shown}")
    click.echo(f"table -> {out / 'bench.csv'}; figure -> {fig}")


@main.command()
@click.option("--address", default="127.0.0.1:8000", show_default=True)
@click.option("--static", "static_dir", default=None, type=click.Path(),
              help="Directory with the built dashboard (served at /app).")
@click.pass_context
def serve(ctx, address, static_dir):
    """Serve the persisted-run HTTP API (and optionally the dashboard)."""
    from .service import serve as serve_app

    serve_app(address, ctx.obj["workspace"], static_dir)


@main.command()
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="csv", show_default=True,
              type=click.Choice(["csv", "json"]))
@click.option("--out", "out_file", default=None, type=click.Path())
def export(run_dir, fmt, out_file):
    """Export a run's latent matrix as CSV or JSON."""
    latents = load_latents(Path(run_dir) / "latents")
    if fmt == "csv":
        dim = latents.latent_dim
        lines = ["segment_id," + ",".join(f"dim_{i}" for i in range(dim))]
        for sid, row in zip(latents.segment_ids, latents.vectors.astype(np.float32)):
            lines.append(sid + "," + ",".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            {
                "ids": latents.segment_ids,
                "latent_dim": latents.latent_dim,
                "vectors": [
                    [float(np.float32(v)) for v in row] for row in latents.vectors
                ],
            },
            indent=2,
        )
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_file}")
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
