"""Core data types for raw recordings, labels, and segment sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSchema:
    """Column layout of a delimited event file."""

    time_column_name: str
    channel_names: tuple[str, ...]
    sample_rate_hz: Optional[float] = None

    def __post_init__(self):
        if not self.channel_names:
            raise IngestError("schema requires at least one channel")
        if len(set(self.channel_names)) != len(self.channel_names):
            raise IngestError("duplicate channel names in schema")


#: Column layout used by the six-feature current/voltage provider files.
PROVIDER1_SCHEMA = ChannelSchema(
    time_column_name="Time µs",
    channel_names=(
        "Current.Ia",
        "Current.Ib",
        "Current.Ic",
        "Voltage.Va",
        "Voltage.Vb",
        "Voltage.Vc",
    ),
)


@dataclass
class RawRecord:
    """One parsed multichannel recording."""

    record_id: str
    samples: np.ndarray  # (channels, length)
    sample_rate_hz: float
    tag_string: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise IngestError(f"samples must be 2D, got {self.samples.shape}")
        if self.sample_rate_hz <= 0:
            raise IngestError(f"sample rate must be positive: {self.sample_rate_hz}")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class TaxonomyNode:
    code: str
    name: str
    parent_code: Optional[str] = None


class LabelTaxonomy:
    """A forest of label codes with a stable depth-first ordering."""

    def __init__(self, nodes: list[TaxonomyNode]):
        codes = [n.code for n in nodes]
        if len(set(codes)) != len(codes):
            raise IngestError("taxonomy codes must be unique")
        by_code = {n.code: n for n in nodes}
        children: dict[Optional[str], list[str]] = {}
        for n in nodes:
            if n.parent_code is not None and n.parent_code not in by_code:
                raise IngestError(f"unknown parent code {n.parent_code!r}")
            children.setdefault(n.parent_code, []).append(n.code)
        # depth-first ordering, roots and siblings in file order
        ordered: list[str] = []
        stack = list(reversed(children.get(None, [])))
        while stack:
            code = stack.pop()
            ordered.append(code)
            stack.extend(reversed(children.get(code, [])))
        if len(ordered) != len(nodes):
            raise IngestError("taxonomy contains a cycle or orphaned node")

        self.nodes = nodes
        self.by_code = by_code
        self.children = children
        self.ordered_codes = ordered
        self.index = {c: i for i, c in enumerate(ordered)}
        # map each code to its top-level category root
        self.top_category: dict[str, str] = {}
        for code in ordered:
            node = by_code[code]
            while node.parent_code is not None:
                node = by_code[node.parent_code]
            self.top_category[code] = node.code

    def __len__(self) -> int:
        return len(self.ordered_codes)

    def __contains__(self, code: str) -> bool:
        return code in self.by_code

    @property
    def root_codes(self) -> list[str]:
        return self.children.get(None, [])


@dataclass
class LabelSet:
    """Binary presence vector over a taxonomy's ordered codes."""

    vector: np.ndarray
    source_codes: tuple[str, ...] = ()

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.int8)

    @classmethod
    def from_codes(cls, codes, taxonomy: LabelTaxonomy) -> "LabelSet":
        vec = np.zeros(len(taxonomy), dtype=np.int8)
        for code in codes:
            vec[taxonomy.index[code]] = 1
        return cls(vec, tuple(codes))

    def codes(self, taxonomy: LabelTaxonomy) -> list[str]:
        return [c for c, bit in zip(taxonomy.ordered_codes, self.vector) if bit]


@dataclass
class Segment:
    """One normalized fixed-length slice of a source record."""

    segment_id: str
    source_record_id: str
    values: np.ndarray  # (channels, seg_len), normalized
    labels: LabelSet
    event_duration_s: float
    padded_fraction: float


@dataclass
class SegmentSet:
    """Uniform segments plus the metadata needed to interpret them."""

    segments: list[Segment]
    channel_names: tuple[str, ...]
    sample_rate_hz: float
    taxonomy_codes: tuple[str, ...]
    norm_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.segments:
            shape = self.segments[0].values.shape
            ids = set()
            for seg in self.segments:
                if seg.values.shape != shape:
                    raise IngestError(
                        f"segment {seg.segment_id}: shape {seg.values.shape} "
                        f"differs from {shape}"
                    )
                if not np.all(np.isfinite(seg.values)):
                    raise IngestError(f"segment {seg.segment_id}: non-finite values")
                if seg.segment_id in ids:
                    raise IngestError(f"duplicate segment id {seg.segment_id}")
                ids.add(seg.segment_id)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def n_channels(self) -> int:
        return self.segments[0].values.shape[0] if self.segments else 0

    @property
    def seg_len(self) -> int:
        return self.segments[0].values.shape[1] if self.segments else 0

    @property
    def segment_ids(self) -> list[str]:
        return [s.segment_id for s in self.segments]

    def stacked(self) -> np.ndarray:
        """All segment values as one (n, channels, seg_len) array."""
        return np.stack([s.values for s in self.segments], axis=0)
