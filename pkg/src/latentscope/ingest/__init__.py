"""Parsing, preprocessing, and synthetic generation of event recordings."""

from .archive import archive_fingerprint, load_archive, save_archive
from .io import (
    UnknownLabelCodeWarning,
    load_label_manifest,
    load_taxonomy,
    parse_event_file,
    parse_label_tags,
)
from .pipeline import ingest_dataset, preprocess_record
from .preprocess import (
    EventRegion,
    cycle_length,
    detect_event_regions,
    non_event_regions,
    normalize_segments,
    resample_linear,
    resample_to_length,
    segment_and_pad,
)
from .synthetic import (
    ClassSpec,
    SyntheticSpec,
    default_classes,
    generate_synthetic_dataset,
)
from .types import (
    PROVIDER1_SCHEMA,
    ChannelSchema,
    IngestError,
    LabelSet,
    LabelTaxonomy,
    RawRecord,
    Segment,
    SegmentSet,
    TaxonomyNode,
)

__all__ = [
    "ChannelSchema",
    "ClassSpec",
    "EventRegion",
    "IngestError",
    "LabelSet",
    "LabelTaxonomy",
    "PROVIDER1_SCHEMA",
    "RawRecord",
    "Segment",
    "SegmentSet",
    "SyntheticSpec",
    "TaxonomyNode",
    "UnknownLabelCodeWarning",
    "archive_fingerprint",
    "cycle_length",
    "default_classes",
    "detect_event_regions",
    "generate_synthetic_dataset",
    "ingest_dataset",
    "load_archive",
    "load_label_manifest",
    "load_taxonomy",
    "non_event_regions",
    "normalize_segments",
    "parse_event_file",
    "parse_label_tags",
    "preprocess_record",
    "resample_linear",
    "resample_to_length",
    "save_archive",
    "segment_and_pad",
]
