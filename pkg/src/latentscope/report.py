"""Matplotlib figure rendering for report outputs.

Every report-producing CLI path writes a figure next to its delimited
output: cluster maps for validate, overlay plots for compare, runtime
curves for bench.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_CLUSTER_CMAP = plt.get_cmap("tab20")


def _cluster_color(label: int):
    if label < 0:
        return (0.6, 0.6, 0.6, 0.5)
    return _CLUSTER_CMAP(label % 20)


def render_map_figure(map_payload: dict, out_path: Union[str, Path]) -> Path:
    """Scatter of the 2D latent map colored by cluster, sized by duration."""
    points = map_payload["points"]
    xs = np.array([p["x"] for p in points])
    ys = np.array([p["y"] for p in points])
    colors = [_cluster_color(p["cluster"]) for p in points]
    sizes = 12.0 + 30.0 * np.log1p([p["duration_s"] for p in points])

    fig, ax = plt.subplots(figsize=(7, 6))
    ax.scatter(xs, ys, c=colors, s=sizes, edgecolors="none", alpha=0.85)
    ax.set_title(f"latent map - run {map_payload.get('run_id', '')[:8]}")
    ax.set_xlabel("dim 1")
    ax.set_ylabel("dim 2")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_correspondence_figure(compare_payload: dict,
                                 out_path: Union[str, Path]) -> Path:
    """Overlay of both projections with same-id connector lines.

    Line opacity follows the displacement-length percentile, so large
    disagreements stand out.
    """
    a = np.asarray(compare_payload["coords_a"], dtype=float)
    b = np.asarray(compare_payload["coords_b"], dtype=float)
    disp = np.asarray(compare_payload["correspondence"]["displacements"], dtype=float)
    lengths = np.linalg.norm(disp, axis=1)
    if lengths.max() > 0:
        ranks = lengths.argsort().argsort() / max(1, len(lengths) - 1)
    else:
        ranks = np.zeros_like(lengths)

    fig, ax = plt.subplots(figsize=(7, 6))
    for (xa, ya), (xb, yb), alpha in zip(a, b, 0.08 + 0.72 * ranks):
        ax.plot([xa, xb], [ya, yb], color="gray", linewidth=0.7, alpha=float(alpha))
    ax.scatter(a[:, 0], a[:, 1], s=14, c="tab:blue", label="run A")
    ax.scatter(b[:, 0], b[:, 1], s=14, c="tab:red", label="run B")
    mean_pct = compare_payload["agreement"]["mean_percent"]
    ax.set_title(f"correspondence - agreement {mean_pct:.2f}%")
    ax.legend(loc="best")
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_benchmark_figure(rows: list[dict], out_path: Union[str, Path]) -> Path:
    """Wall time vs latent dimension, one line per encoder kind."""
    fig, ax = plt.subplots(figsize=(7, 5))
    kinds = sorted({r["kind"] for r in rows})
    for kind in kinds:
        cells = sorted(
            (r for r in rows if r["kind"] == kind and r.get("status") == "ok"),
            key=lambda r: r["latent_dim"],
        )
        if not cells:
            continue
        ax.plot(
            [r["latent_dim"] for r in cells],
            [r["wall_time_s"] for r in cells],
            marker="o",
            label=kind,
        )
    ax.set_xlabel("latent dimension")
    ax.set_ylabel("wall time (s)")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_title("training runtime by encoder kind")
    ax.legend()
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
