"""Preprocessing: resampling, event flagging, segmentation, normalization.

The event detector scores each waveform cycle by how much it deviates
from the previous one and flags cycles whose score exceeds a robust
threshold (median + k * MAD over all cycle scores).  Short final
segments are padded by circularly tiling the largest non-event region,
entering the tile at the offset whose value/slope best continues the
real signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import IngestError, RawRecord


@dataclass(frozen=True)
class EventRegion:
    """Half-open sample range [start_sample, end_sample)."""

    start_sample: int
    end_sample: int

    @property
    def length(self) -> int:
        return self.end_sample - self.start_sample


@dataclass
class RawSegment:
    """Pre-normalization segment produced by segment_and_pad."""

    values: np.ndarray  # (channels, seg_len)
    start_sample: int
    event_duration_s: float
    padded_fraction: float


def cycle_length(sample_rate_hz: float, line_freq_hz: float = 60.0) -> int:
    """Samples per waveform cycle (floor, matching 20 ksps @ 60 Hz -> 333)."""
    return int(math.floor(sample_rate_hz / line_freq_hz))


def resample_linear(series: np.ndarray, src_rate_hz: float, dst_rate_hz: float) -> np.ndarray:
    """Linear-interpolation resampling along the last axis.

    Output sample i takes the value at source position i * src/dst,
    clamped to the final source sample.  Works on 1D series or
    (channels, length) arrays.
    """
    if src_rate_hz <= 0 or dst_rate_hz <= 0:
        raise IngestError("rates must be positive")
    series = np.asarray(series, dtype=np.float64)
    n = series.shape[-1]
    if n < 2:
        raise IngestError(f"need at least 2 samples to resample, got {n}")
    if src_rate_hz == dst_rate_hz:
        return series.copy()
    out_len = int(round(n * dst_rate_hz / src_rate_hz))
    positions = np.arange(out_len) * (src_rate_hz / dst_rate_hz)
    positions = np.minimum(positions, n - 1)
    grid = np.arange(n, dtype=np.float64)
    if series.ndim == 1:
        return np.interp(positions, grid, series)
    return np.stack([np.interp(positions, grid, ch) for ch in series])


def resample_to_length(values: np.ndarray, out_len: int) -> np.ndarray:
    """Linear resample of (channels, length) data onto out_len samples."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[-1]
    if out_len == n:
        return values.copy()
    return resample_linear(values, float(n), float(out_len))


def detect_event_regions(
    record: RawRecord,
    cycle_len_samples: int,
    threshold_k: float = 5.0,
) -> tuple[list[EventRegion], np.ndarray]:
    """Flag cycles that deviate from their predecessor.

    Per-cycle score: RMS of |x[j] - x[j - cycle_len]| over the cycle
    window, maximized across channels.  A cycle is flagged when its
    score exceeds median + threshold_k * MAD of all scores; adjacent
    flagged cycles merge into one region.  Returns (regions, scores).
    """
    if cycle_len_samples < 2:
        raise IngestError(f"cycle length must be >= 2, got {cycle_len_samples}")
    x = record.samples
    n = x.shape[1]
    if n < 3 * cycle_len_samples:
        raise IngestError(
            f"record too short: {n} samples < 3 cycles of {cycle_len_samples}"
        )
    n_cycles = n // cycle_len_samples
    diffs = np.abs(x[:, cycle_len_samples:] - x[:, :-cycle_len_samples])
    scores = np.zeros(n_cycles, dtype=np.float64)
    for c in range(1, n_cycles):
        lo = c * cycle_len_samples
        hi = lo + cycle_len_samples
        window = diffs[:, lo - cycle_len_samples : hi - cycle_len_samples]
        rms = np.sqrt(np.mean(window * window, axis=1))
        scores[c] = float(rms.max())

    med = float(np.median(scores))
    mad = float(np.median(np.abs(scores - med)))
    flagged = scores > med + threshold_k * mad

    regions: list[EventRegion] = []
    c = 0
    while c < n_cycles:
        if flagged[c]:
            start = c
            while c < n_cycles and flagged[c]:
                c += 1
            regions.append(
                EventRegion(start * cycle_len_samples, c * cycle_len_samples)
            )
        else:
            c += 1
    return regions, scores


def non_event_regions(n_samples: int, events: list[EventRegion]) -> list[EventRegion]:
    """Complement of the event regions within [0, n_samples)."""
    out = []
    cursor = 0
    for r in sorted(events, key=lambda r: r.start_sample):
        if r.start_sample > cursor:
            out.append(EventRegion(cursor, r.start_sample))
        cursor = max(cursor, r.end_sample)
    if cursor < n_samples:
        out.append(EventRegion(cursor, n_samples))
    return out


def _best_tile_offset(
    region: np.ndarray, last_value: np.ndarray, last_slope: np.ndarray, cycle_len: int
) -> int:
    """Offset into the tile region whose value/slope best matches the tail.

    Cost per offset o: sum over channels of |value(o) - last_value|
    + 0.5 * cycle_len * |slope(o) - last_slope|.
    """
    m = region.shape[1]
    slopes = region - np.roll(region, 1, axis=1)
    cost = np.abs(region - last_value[:, None]).sum(axis=0)
    cost += 0.5 * cycle_len * np.abs(slopes - last_slope[:, None]).sum(axis=0)
    return int(np.argmin(cost))


def segment_and_pad(
    record: RawRecord,
    event_regions: list[EventRegion],
    seg_len_samples: int,
    cycle_len_samples: int | None = None,
) -> list[RawSegment]:
    """Split a record into fixed-length segments, padding the short tail.

    The final short segment is extended by circularly tiling the largest
    non-event region, starting just after the offset that best continues
    the last real sample.  event_duration_s measures the overlap of the
    event regions with each segment's real samples.
    """
    if seg_len_samples <= 0:
        raise IngestError("seg_len_samples must be positive")
    x = record.samples
    n = x.shape[1]
    if cycle_len_samples is None:
        cycle_len_samples = max(2, cycle_length(record.sample_rate_hz))
    n_segments = math.ceil(n / seg_len_samples)

    segments: list[RawSegment] = []
    for k in range(n_segments):
        lo = k * seg_len_samples
        hi = min(lo + seg_len_samples, n)
        real = x[:, lo:hi]
        pad_len = seg_len_samples - (hi - lo)
        if pad_len > 0:
            baseline = non_event_regions(n, event_regions)
            baseline = [r for r in baseline if r.length >= 2]
            if not baseline:
                raise IngestError(
                    f"record {record.record_id}: padding required but no "
                    f"non-event region exists"
                )
            largest = max(baseline, key=lambda r: r.length)
            tile = x[:, largest.start_sample : largest.end_sample]
            last_value = real[:, -1]
            last_slope = real[:, -1] - real[:, -2] if real.shape[1] >= 2 else np.zeros(
                x.shape[0]
            )
            offset = _best_tile_offset(tile, last_value, last_slope, cycle_len_samples)
            idx = (offset + 1 + np.arange(pad_len)) % tile.shape[1]
            values = np.concatenate([real, tile[:, idx]], axis=1)
        else:
            values = real.copy()

        overlap = 0
        for r in event_regions:
            overlap += max(0, min(r.end_sample, hi) - max(r.start_sample, lo))
        segments.append(
            RawSegment(
                values=values,
                start_sample=lo,
                event_duration_s=overlap / record.sample_rate_hz,
                padded_fraction=pad_len / seg_len_samples,
            )
        )
    return segments


def baseline_stats(
    record: RawRecord,
    event_regions: list[EventRegion],
    stats_source: str = "non_event_baseline",
) -> tuple[np.ndarray, np.ndarray, str]:
    """Per-channel mean/std from the chosen stats region.

    Defaults to the record's non-event samples, falling back to
    whole-record stats per channel when the baseline is degenerate.
    Raises for channels that are constant in both sources.
    """
    if stats_source not in ("non_event_baseline", "whole_record"):
        raise IngestError(f"unknown stats source {stats_source!r}")
    x = record.samples
    n = x.shape[1]
    whole_mean = x.mean(axis=1)
    whole_std = x.std(axis=1)

    if stats_source == "non_event_baseline":
        keep = np.ones(n, dtype=bool)
        for r in event_regions:
            keep[r.start_sample : r.end_sample] = False
        if keep.any():
            base = x[:, keep]
            mean = base.mean(axis=1)
            std = base.std(axis=1)
            source = "non_event_baseline"
        else:
            mean, std, source = whole_mean, whole_std.copy(), "whole_record"
    else:
        mean, std, source = whole_mean.copy(), whole_std.copy(), "whole_record"

    for c in range(x.shape[0]):
        if std[c] == 0.0:
            if whole_std[c] == 0.0:
                raise IngestError(
                    f"record {record.record_id}: channel {c} is constant"
                )
            mean[c] = whole_mean[c]
            std[c] = whole_std[c]
    return mean, std, source


def normalize_segments(
    segments: list[RawSegment],
    record: RawRecord,
    event_regions: list[EventRegion],
    stats_source: str = "non_event_baseline",
) -> tuple[list[RawSegment], dict]:
    """Z-score segment values using the source record's baseline stats."""
    mean, std, source = baseline_stats(record, event_regions, stats_source)
    normalized = []
    for seg in segments:
        values = (seg.values - mean[:, None]) / std[:, None]
        normalized.append(
            RawSegment(
                values=values,
                start_sample=seg.start_sample,
                event_duration_s=seg.event_duration_s,
                padded_fraction=seg.padded_fraction,
            )
        )
    stats = {
        "mean": mean.tolist(),
        "std": std.tolist(),
        "source": source,
    }
    return normalized, stats
