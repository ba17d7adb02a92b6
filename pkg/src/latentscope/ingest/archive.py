"""SegmentSet archives: segments.bin (f32 LE) + segments.meta.json."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Union

import numpy as np

from .types import IngestError, LabelSet, LabelTaxonomy, Segment, SegmentSet

BIN_NAME = "segments.bin"
META_NAME = "segments.meta.json"


def save_archive(segset: SegmentSet, out_dir: Union[str, Path]) -> Path:
    """Write row-major [segment][channel][sample] float32 plus metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = segset.stacked().astype("<f4")
    (out / BIN_NAME).write_bytes(data.tobytes(order="C"))

    codes_by_segment = []
    order = list(segset.taxonomy_codes)
    for seg in segset.segments:
        codes_by_segment.append(
            [c for c, bit in zip(order, seg.labels.vector) if bit]
        )
    meta = {
        "n_segments": len(segset),
        "n_channels": segset.n_channels,
        "seg_len": segset.seg_len,
        "sample_rate_hz": segset.sample_rate_hz,
        "channel_names": list(segset.channel_names),
        "taxonomy_codes": order,
        "segment_ids": segset.segment_ids,
        "source_record_ids": [s.source_record_id for s in segset.segments],
        "labels": codes_by_segment,
        "event_duration_s": [s.event_duration_s for s in segset.segments],
        "padded_fraction": [s.padded_fraction for s in segset.segments],
        "norm_stats": segset.norm_stats,
    }
    (out / META_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def load_archive(archive_dir: Union[str, Path]) -> SegmentSet:
    root = Path(archive_dir)
    meta = json.loads((root / META_NAME).read_text(encoding="utf-8"))
    n, c, l = meta["n_segments"], meta["n_channels"], meta["seg_len"]
    raw = np.frombuffer((root / BIN_NAME).read_bytes(), dtype="<f4")
    if raw.size != n * c * l:
        raise IngestError(
            f"archive size mismatch: {raw.size} values != {n}x{c}x{l}"
        )
    data = raw.reshape(n, c, l).astype(np.float64)

    order = meta["taxonomy_codes"]
    index = {code: i for i, code in enumerate(order)}
    segments = []
    for i in range(n):
        vec = np.zeros(len(order), dtype=np.int8)
        for code in meta["labels"][i]:
            vec[index[code]] = 1
        segments.append(
            Segment(
                segment_id=meta["segment_ids"][i],
                source_record_id=meta["source_record_ids"][i],
                values=data[i],
                labels=LabelSet(vec, tuple(meta["labels"][i])),
                event_duration_s=meta["event_duration_s"][i],
                padded_fraction=meta["padded_fraction"][i],
            )
        )
    return SegmentSet(
        segments=segments,
        channel_names=tuple(meta["channel_names"]),
        sample_rate_hz=meta["sample_rate_hz"],
        taxonomy_codes=tuple(order),
        norm_stats=meta["norm_stats"],
    )


def archive_fingerprint(archive_dir: Union[str, Path]) -> str:
    """Content hash of the archive files (stable across machines)."""
    root = Path(archive_dir)
    digest = hashlib.sha256()
    digest.update((root / BIN_NAME).read_bytes())
    digest.update((root / META_NAME).read_bytes())
    return digest.hexdigest()[:16]
