"""End-to-end ingest: raw delimited files -> normalized SegmentSet."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

from .io import load_label_manifest, load_taxonomy, parse_event_file, parse_label_tags
from .preprocess import (
    cycle_length,
    detect_event_regions,
    normalize_segments,
    resample_linear,
    segment_and_pad,
)
from .types import ChannelSchema, IngestError, RawRecord, Segment, SegmentSet


def preprocess_record(
    record: RawRecord,
    seg_len_samples: int,
    threshold_k: float = 5.0,
    line_freq_hz: float = 60.0,
    stats_source: str = "non_event_baseline",
):
    """Detect events, segment, pad, and normalize one record."""
    cyc = cycle_length(record.sample_rate_hz, line_freq_hz)
    regions, scores = detect_event_regions(record, cyc, threshold_k)
    raw_segments = segment_and_pad(record, regions, seg_len_samples, cyc)
    normalized, stats = normalize_segments(raw_segments, record, regions, stats_source)
    return normalized, regions, scores, stats


def ingest_dataset(
    records_dir: Union[str, Path],
    taxonomy_path: Union[str, Path],
    labels_path: Optional[Union[str, Path]] = None,
    schema: Optional[ChannelSchema] = None,
    seg_seconds: float = 1.0,
    resample_hz: Optional[float] = None,
    threshold_k: float = 5.0,
    line_freq_hz: float = 60.0,
    stats_source: str = "non_event_baseline",
) -> SegmentSet:
    """Parse every CSV under records_dir into one normalized SegmentSet.

    Files are processed in sorted order; per-record preprocessing is
    independent, so the result is deterministic.
    """
    taxonomy = load_taxonomy(taxonomy_path)
    tags = load_label_manifest(labels_path) if labels_path else {}
    files = sorted(Path(records_dir).glob("*.csv"))
    if not files:
        raise IngestError(f"no .csv files under {records_dir}")

    segments: list[Segment] = []
    norm_stats: dict[str, dict] = {}
    channel_names: Optional[tuple[str, ...]] = None
    out_rate: Optional[float] = None

    for path in files:
        record_id = path.stem
        if schema is None:
            schema = _infer_schema(path)
        record = parse_event_file(path.read_bytes(), schema, record_id=record_id)
        record.tag_string = tags.get(record_id, "")
        if resample_hz is not None and resample_hz != record.sample_rate_hz:
            record = RawRecord(
                record_id=record_id,
                samples=resample_linear(
                    record.samples, record.sample_rate_hz, resample_hz
                ),
                sample_rate_hz=resample_hz,
                tag_string=record.tag_string,
            )
        if out_rate is None:
            out_rate = record.sample_rate_hz
            channel_names = schema.channel_names
        elif record.sample_rate_hz != out_rate:
            raise IngestError(
                f"{record_id}: rate {record.sample_rate_hz} != dataset rate "
                f"{out_rate}; pass resample_hz to unify"
            )

        seg_len = int(round(seg_seconds * record.sample_rate_hz))
        normalized, _, _, stats = preprocess_record(
            record, seg_len, threshold_k, line_freq_hz, stats_source
        )
        norm_stats[record_id] = stats
        labels = parse_label_tags(record.tag_string, taxonomy)
        for k, raw in enumerate(normalized):
            segments.append(
                Segment(
                    segment_id=f"{record_id}:{k}",
                    source_record_id=record_id,
                    values=raw.values,
                    labels=labels,
                    event_duration_s=raw.event_duration_s,
                    padded_fraction=raw.padded_fraction,
                )
            )

    return SegmentSet(
        segments=segments,
        channel_names=channel_names,
        sample_rate_hz=out_rate,
        taxonomy_codes=tuple(taxonomy.ordered_codes),
        norm_stats=norm_stats,
    )


def _infer_schema(path: Path) -> ChannelSchema:
    """Build a schema from a file's header: first column is time."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    cols = [c.strip() for c in header.split(",")]
    if len(cols) < 2:
        raise IngestError(f"{path}: header must contain time plus channels")
    return ChannelSchema(time_column_name=cols[0], channel_names=tuple(cols[1:]))
