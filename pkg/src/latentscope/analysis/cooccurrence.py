"""Label co-occurrence counts over a segment set."""

from __future__ import annotations

import numpy as np

from ..ingest import SegmentSet


def label_cooccurrence(segment_set: SegmentSet) -> np.ndarray:
    """Symmetric count matrix over taxonomy codes.

    Entry (i, j) counts segments whose label set contains both codes;
    the diagonal holds per-code segment counts.
    """
    size = len(segment_set.taxonomy_codes)
    counts = np.zeros((size, size), dtype=np.int64)
    for seg in segment_set.segments:
        vec = seg.labels.vector.astype(np.int64)
        counts += np.outer(vec, vec)
    return counts
