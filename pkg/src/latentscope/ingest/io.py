"""Readers for delimited event files, taxonomies, and label manifests."""

from __future__ import annotations

import io
import warnings
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .types import (
    ChannelSchema,
    IngestError,
    LabelSet,
    LabelTaxonomy,
    RawRecord,
    TaxonomyNode,
)

TAG_DELIMITERS = "|,;"


class UnknownLabelCodeWarning(UserWarning):
    pass


def parse_event_file(
    data: bytes, schema: ChannelSchema, record_id: str = "record"
) -> RawRecord:
    """Parse a comma-separated event file into channel rows.

    The sample rate comes from the schema when given, otherwise it is
    inferred as 1/median(delta t); a time column whose name carries
    a microsecond unit is interpreted accordingly.
    """
    frame = pd.read_csv(io.BytesIO(data))
    missing = [
        col
        for col in (schema.time_column_name, *schema.channel_names)
        if col not in frame.columns
    ]
    if missing:
        raise IngestError(f"missing column(s): {', '.join(missing)}")
    if len(frame) < 2:
        raise IngestError(f"need at least 2 rows, got {len(frame)}")

    t = frame[schema.time_column_name].to_numpy(dtype=np.float64)
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise IngestError(f"time column {schema.time_column_name!r} is not monotonic")

    rate = schema.sample_rate_hz
    if rate is None:
        step = float(np.median(dt))
        name = schema.time_column_name.lower()
        if "µs" in name or "us" in name or "micro" in name:
            step *= 1e-6
        rate = 1.0 / step

    samples = np.stack(
        [frame[c].to_numpy(dtype=np.float64) for c in schema.channel_names]
    )
    return RawRecord(record_id=record_id, samples=samples, sample_rate_hz=rate)


def load_taxonomy(path: Union[str, Path]) -> LabelTaxonomy:
    """Load a tab-separated taxonomy: code, name, parent (blank for roots)."""
    nodes = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise IngestError(f"bad taxonomy line: {line!r}")
        code, name = parts[0].strip(), parts[1].strip()
        parent = parts[2].strip() if len(parts) > 2 and parts[2].strip() else None
        nodes.append(TaxonomyNode(code=code, name=name, parent_code=parent))
    return LabelTaxonomy(nodes)


def load_label_manifest(path: Union[str, Path]) -> dict[str, str]:
    """Load record_id -> tag_string pairs from a tab-separated manifest."""
    tags: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t", 1)
        tags[parts[0].strip()] = parts[1].strip() if len(parts) > 1 else ""
    return tags


def parse_label_tags(
    tag_string: str,
    taxonomy: LabelTaxonomy,
    delimiters: str = TAG_DELIMITERS,
) -> LabelSet:
    """Split a raw tag string into a LabelSet over the taxonomy.

    Unknown codes are reported as warnings, never errors; an empty string
    yields the all-zero vector.
    """
    text = tag_string or ""
    for d in delimiters[1:]:
        text = text.replace(d, delimiters[0])
    raw = [p.strip() for p in text.split(delimiters[0])]
    codes = [c for c in raw if c]
    known = [c for c in codes if c in taxonomy]
    unknown = [c for c in codes if c not in taxonomy]
    if unknown:
        warnings.warn(
            f"unknown label code(s): {', '.join(sorted(set(unknown)))}",
            UnknownLabelCodeWarning,
            stacklevel=2,
        )
    return LabelSet.from_codes(known, taxonomy)
