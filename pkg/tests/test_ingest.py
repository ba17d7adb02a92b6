"""Ingest tests: parsing, preprocessing oracles, synthetic generation."""

import json
from pathlib import Path

import numpy as np
import pytest

from latentscope.ingest import (
    ChannelSchema,
    ClassSpec,
    IngestError,
    PROVIDER1_SCHEMA,
    RawRecord,
    SyntheticSpec,
    UnknownLabelCodeWarning,
    archive_fingerprint,
    cycle_length,
    default_classes,
    detect_event_regions,
    generate_synthetic_dataset,
    ingest_dataset,
    load_archive,
    load_taxonomy,
    normalize_segments,
    parse_event_file,
    parse_label_tags,
    resample_linear,
    save_archive,
    segment_and_pad,
)
from latentscope.ingest.preprocess import non_event_regions


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _csv_bytes(header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


def test_parse_infers_rate_from_microsecond_time():
    data = _csv_bytes(
        ["Time µs", "ch"], [[0, 1.0], [50, 2.0], [100, 3.0], [150, 4.0]]
    )
    schema = ChannelSchema(time_column_name="Time µs", channel_names=("ch",))
    rec = parse_event_file(data, schema)
    assert rec.sample_rate_hz == pytest.approx(20000.0)
    assert rec.samples.shape == (1, 4)


def test_parse_missing_column_names_it():
    data = _csv_bytes(["Time µs", "Current.Ia"], [[0, 1.0], [50, 2.0]])
    with pytest.raises(IngestError, match="Voltage.Vb"):
        parse_event_file(data, PROVIDER1_SCHEMA)


def test_parse_rejects_non_monotonic_time():
    data = _csv_bytes(["Time µs", "ch"], [[0, 1.0], [100, 2.0], [50, 3.0]])
    schema = ChannelSchema(time_column_name="Time µs", channel_names=("ch",))
    with pytest.raises(IngestError, match="monotonic"):
        parse_event_file(data, schema)


def test_parse_rejects_short_file():
    data = _csv_bytes(["Time µs", "ch"], [[0, 1.0]])
    schema = ChannelSchema(time_column_name="Time µs", channel_names=("ch",))
    with pytest.raises(IngestError, match="2 rows"):
        parse_event_file(data, schema)


def test_parse_round_trips_synthetic_writer(tmp_path):
    spec = SyntheticSpec(
        n_records=1, channels=2, sample_rate_hz=20000.0, noise_std=0.0, seed=3
    )
    generate_synthetic_dataset(spec, tmp_path)
    path = tmp_path / "records" / "rec_0000.csv"
    schema = ChannelSchema(time_column_name="Time µs", channel_names=("ch_0", "ch_1"))
    rec = parse_event_file(path.read_bytes(), schema, record_id="rec_0000")
    assert rec.samples.shape == (2, 20000)
    assert rec.sample_rate_hz == pytest.approx(20000.0)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _interp_oracle(series, src_rate, dst_rate):
    """Independent scalar-loop linear interpolation."""
    n = len(series)
    out_len = int(round(n * dst_rate / src_rate))
    out = np.zeros(out_len)
    for i in range(out_len):
        pos = i * src_rate / dst_rate
        if pos >= n - 1:
            out[i] = series[-1]
            continue
        j = int(pos)
        frac = pos - j
        out[i] = series[j] * (1 - frac) + series[j + 1] * frac
    return out


def test_resample_identity_when_rates_match():
    x = np.random.default_rng(0).standard_normal(64)
    np.testing.assert_array_equal(resample_linear(x, 8.0, 8.0), x)


def test_resample_midpoints_and_end_clamp():
    out = resample_linear(np.array([0.0, 1.0, 2.0, 3.0]), 4.0, 8.0)
    np.testing.assert_allclose(out, [0, 0.5, 1, 1.5, 2, 2.5, 3, 3])


def test_resample_preserves_first_sample():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(100)
    for dst in (7.0, 13.0, 20.0):
        assert resample_linear(x, 10.0, dst)[0] == x[0]


def test_resample_matches_scalar_oracle():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(257)
    out = resample_linear(x, 8000.0, 20000.0)
    oracle = _interp_oracle(x, 8000.0, 20000.0)
    np.testing.assert_allclose(out, oracle, atol=1e-12)


def test_resample_round_trip_band_limited():
    # smooth band-limited signal survives 8k -> 20k -> 8k within 5% of std
    rng = np.random.default_rng(3)
    t = np.arange(1000) / 8000.0
    x = np.zeros_like(t)
    for _ in range(8):
        f = rng.uniform(10, 400)
        x += rng.standard_normal() * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    up = resample_linear(x, 8000.0, 20000.0)
    back = resample_linear(up, 20000.0, 8000.0)
    assert back.shape == x.shape
    assert np.abs(back - x).max() < 0.05 * x.std()


# ---------------------------------------------------------------------------
# event detection
# ---------------------------------------------------------------------------

def _periodic_record(n_cycles=30, cycle_len=40, channels=2, amp=1.0):
    cyc = amp * np.sin(2 * np.pi * np.arange(cycle_len) / cycle_len)
    x = np.tile(cyc, n_cycles)
    return RawRecord("r", np.stack([x] * channels), sample_rate_hz=cycle_len * 60.0)


def test_detector_silent_on_pure_periodic():
    rec = _periodic_record()
    regions, scores = detect_event_regions(rec, 40, threshold_k=5.0)
    assert regions == []
    np.testing.assert_array_equal(scores, np.zeros_like(scores))


def test_detector_flags_amplitude_step():
    # amplitude climbs to 2x across cycles 10..12 and stays there; the
    # consecutive-cycle rule flags every cycle of the onset (a square
    # on/off window would only flag its two transition cycles)
    cycle_len, n_cycles = 40, 30
    rec = _periodic_record(n_cycles, cycle_len)
    x = rec.samples.copy()
    n = x.shape[1]
    factor = np.ones(n)
    ramp = slice(10 * cycle_len, 13 * cycle_len)
    factor[ramp] = 1.0 + np.arange(3 * cycle_len) / (3 * cycle_len)
    factor[13 * cycle_len :] = 2.0
    x *= factor
    rec = RawRecord("r", x, rec.sample_rate_hz)
    regions, scores = detect_event_regions(rec, cycle_len, threshold_k=5.0)

    # hand-rolled per-cycle scores
    expected = np.zeros(n_cycles)
    for c in range(1, n_cycles):
        worst = 0.0
        for ch in range(x.shape[0]):
            acc = 0.0
            for j in range(c * cycle_len, (c + 1) * cycle_len):
                d = abs(x[ch, j] - x[ch, j - cycle_len])
                acc += d * d
            worst = max(worst, np.sqrt(acc / cycle_len))
        expected[c] = worst
    np.testing.assert_allclose(scores, expected, atol=1e-12)

    # one region covering cycles 10..12 (plus the settling cycle 13)
    assert len(regions) == 1
    assert regions[0].start_sample == 10 * cycle_len
    assert regions[0].end_sample >= 13 * cycle_len


def test_detector_cycle_length_helper():
    assert cycle_length(20000.0, 60.0) == 333


def test_detector_amplitude_translation_invariant():
    rec = _periodic_record()
    x = rec.samples.copy()
    x[:, 10 * 40 : 12 * 40] += 1.5
    base = RawRecord("r", x, rec.sample_rate_hz)
    shifted = RawRecord("r", x + 42.0, rec.sample_rate_hz)
    r1, s1 = detect_event_regions(base, 40)
    r2, s2 = detect_event_regions(shifted, 40)
    assert r1 == r2
    np.testing.assert_allclose(s1, s2, atol=1e-9)


def test_detector_rejects_short_record():
    rec = _periodic_record(n_cycles=2)
    with pytest.raises(IngestError, match="short"):
        detect_event_regions(rec, 40)


# ---------------------------------------------------------------------------
# segmentation and padding
# ---------------------------------------------------------------------------

def test_segment_exact_multiple_no_padding():
    rec = _periodic_record(n_cycles=20, cycle_len=50)  # 1000 samples
    segs = segment_and_pad(rec, [], 500)
    assert len(segs) == 2
    assert all(s.padded_fraction == 0.0 for s in segs)


def test_segment_half_tail_padded_fraction():
    # 2.5 s at 1 kHz, seg_len 1000 -> 3 segments, last half padded
    n = 2500
    x = np.sin(2 * np.pi * 10 * np.arange(n) / 1000.0)[None, :]
    rec = RawRecord("r", x, 1000.0)
    segs = segment_and_pad(rec, [], 1000)
    assert len(segs) == 3
    assert [s.padded_fraction for s in segs] == [0.0, 0.0, 0.5]
    assert all(s.values.shape == (1, 1000) for s in segs)


def test_padding_continues_clean_sinusoid():
    # fine sampling (200 samples/cycle) so a continuous join is possible
    rate, freq, amp = 2000.0, 10.0, 1.0
    n = 2500
    x = amp * np.sin(2 * np.pi * freq * np.arange(n) / rate)[None, :]
    rec = RawRecord("r", x, rate)
    segs = segment_and_pad(rec, [], 2000, cycle_len_samples=200)
    tail = segs[-1]
    kreal = 2500 - 2000  # real samples in the padded segment
    jump = abs(tail.values[0, kreal] - tail.values[0, kreal - 1])
    assert jump < 0.1 * amp


def test_event_duration_measures_overlap():
    from latentscope.ingest import EventRegion

    n = 2000
    x = np.sin(2 * np.pi * np.arange(n) / 40.0)[None, :]
    rec = RawRecord("r", x, 1000.0)
    regions = [EventRegion(900, 1100)]
    segs = segment_and_pad(rec, regions, 1000)
    assert segs[0].event_duration_s == pytest.approx(0.1)
    assert segs[1].event_duration_s == pytest.approx(0.1)


def test_padding_requires_some_baseline():
    from latentscope.ingest import EventRegion

    n = 1500
    x = np.ones((1, n)) * np.sin(np.arange(n))
    rec = RawRecord("r", x, 1000.0)
    with pytest.raises(IngestError, match="non-event"):
        segment_and_pad(rec, [EventRegion(0, n)], 1000)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_normalize_identity_for_standardized_channel():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((1, 4000))
    x = (x - x.mean()) / x.std()
    rec = RawRecord("r", x, 1000.0)
    segs = segment_and_pad(rec, [], 2000)
    normed, stats = normalize_segments(segs, rec, [])
    np.testing.assert_allclose(normed[0].values, segs[0].values, atol=1e-12)
    assert stats["source"] == "non_event_baseline"


def test_normalize_rejects_constant_channel():
    x = np.vstack([np.sin(np.arange(300.0)), np.full(300, 7.0)])
    rec = RawRecord("r", x, 100.0)
    segs = segment_and_pad(rec, [], 100)
    with pytest.raises(IngestError, match="channel 1"):
        normalize_segments(segs, rec, [])


def test_normalize_baseline_becomes_standard():
    from latentscope.ingest import EventRegion

    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 3000)) * 3.0 + 11.0
    x[:, 1000:1400] += 25.0  # event bump excluded from stats
    rec = RawRecord("r", x, 1000.0)
    regions = [EventRegion(1000, 1400)]
    segs = segment_and_pad(rec, regions, 1000)
    normed, stats = normalize_segments(segs, rec, regions)

    mean = np.asarray(stats["mean"])[:, None]
    std = np.asarray(stats["std"])[:, None]
    z = (x - mean) / std
    keep = np.ones(3000, dtype=bool)
    keep[1000:1400] = False
    base = z[:, keep]
    assert np.all(np.abs(base.mean(axis=1)) < 1e-9)
    assert np.all(np.abs(base.std(axis=1) - 1.0) < 1e-9)


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------

@pytest.fixture()
def taxonomy(tmp_path):
    rows = "EQ\tEquipment\t\nEA\tArcing\tEQ\nOU\tJumper Failure\tEQ\n"
    path = tmp_path / "tax.tsv"
    path.write_text(rows, encoding="utf-8")
    return load_taxonomy(path)


def test_parse_tags_sets_known_codes(taxonomy):
    ls = parse_label_tags("EA|OU", taxonomy)
    assert ls.codes(taxonomy) == ["EA", "OU"]
    assert ls.vector.sum() == 2


def test_parse_tags_empty_gives_zero_vector(taxonomy):
    ls = parse_label_tags("", taxonomy)
    assert ls.vector.sum() == 0


def test_parse_tags_warns_on_unknown(taxonomy):
    with pytest.warns(UnknownLabelCodeWarning, match="ZZ"):
        ls = parse_label_tags("EA|ZZ", taxonomy)
    assert ls.codes(taxonomy) == ["EA"]


def test_parse_tags_mixed_delimiters(taxonomy):
    ls = parse_label_tags("EA, OU ;EQ", taxonomy)
    assert ls.codes(taxonomy) == ["EQ", "EA", "OU"]


def test_label_round_trip_identity(taxonomy):
    ls = parse_label_tags("OU|EA", taxonomy)
    rendered = "|".join(ls.codes(taxonomy))
    again = parse_label_tags(rendered, taxonomy)
    np.testing.assert_array_equal(ls.vector, again.vector)


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

def test_synthetic_clean_records_have_no_events(tmp_path):
    spec = SyntheticSpec(n_records=2, channels=3, sample_rate_hz=2000.0,
                         noise_std=0.0, seed=1)
    generate_synthetic_dataset(spec, tmp_path)
    schema = ChannelSchema("Time µs", ("ch_0", "ch_1", "ch_2"))
    rec = parse_event_file(
        (tmp_path / "records" / "rec_0000.csv").read_bytes(), schema
    )
    cyc = json.loads((tmp_path / "manifest.json").read_text())["cycle_len_samples"]
    regions, _ = detect_event_regions(rec, cyc)
    assert regions == []


def test_synthetic_deterministic_bytes(tmp_path):
    spec = SyntheticSpec(n_records=3, classes=default_classes(), seed=9)
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate_synthetic_dataset(spec, a)
    generate_synthetic_dataset(spec, b)
    for rel in ["records/rec_0000.csv", "records/rec_0002.csv", "labels.tsv",
                "manifest.json", "taxonomy.tsv"]:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_synthetic_manifest_counts(tmp_path):
    spec = SyntheticSpec(n_records=150, channels=2, sample_rate_hz=500.0,
                         record_duration_s=0.5, classes=default_classes(), seed=2)
    generate_synthetic_dataset(spec, tmp_path)
    labels = (tmp_path / "labels.tsv").read_text().strip().splitlines()
    assert len(labels) == 150
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    per_class = {}
    for entry in manifest["ground_truth"]:
        per_class[entry["class_index"]] = per_class.get(entry["class_index"], 0) + 1
    assert per_class == {0: 50, 1: 50, 2: 50}
    codes = {c for e in manifest["ground_truth"] for c in e["tag"].split("|")}
    assert codes == {"SAG", "EA", "OSC", "IMP", "OU"}


def test_synthetic_disturbances_are_detected(tmp_path):
    spec = SyntheticSpec(n_records=3, classes=default_classes(), noise_std=0.01,
                         seed=11)
    generate_synthetic_dataset(spec, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    schema = ChannelSchema("Time µs", tuple(manifest["channel_names"]))
    hits = 0
    for i in range(3):
        rec = parse_event_file(
            (tmp_path / "records" / f"rec_{i:04d}.csv").read_bytes(), schema
        )
        regions, _ = detect_event_regions(rec, manifest["cycle_len_samples"])
        hits += bool(regions)
    assert hits == 3


# ---------------------------------------------------------------------------
# end-to-end ingest + archive
# ---------------------------------------------------------------------------

def test_ingest_dataset_and_archive_round_trip(tmp_path):
    spec = SyntheticSpec(n_records=6, classes=default_classes(), seed=5)
    data_dir = tmp_path / "data"
    generate_synthetic_dataset(spec, data_dir)
    segset = ingest_dataset(
        data_dir / "records",
        data_dir / "taxonomy.tsv",
        data_dir / "labels.tsv",
    )
    assert len(segset) == 6
    assert segset.n_channels == 6
    assert segset.seg_len == 2000
    assert all(s.values.shape == (6, 2000) for s in segset.segments)

    arch = tmp_path / "archive"
    save_archive(segset, arch)
    loaded = load_archive(arch)
    assert loaded.segment_ids == segset.segment_ids
    # values survive the float32 round trip
    np.testing.assert_allclose(
        loaded.stacked(), segset.stacked().astype(np.float32), atol=0
    )
    assert archive_fingerprint(arch) == archive_fingerprint(arch)


def test_ingest_is_deterministic(tmp_path):
    spec = SyntheticSpec(n_records=4, classes=default_classes(), seed=8)
    data_dir = tmp_path / "data"
    generate_synthetic_dataset(spec, data_dir)
    args = (data_dir / "records", data_dir / "taxonomy.tsv", data_dir / "labels.tsv")
    a = ingest_dataset(*args)
    b = ingest_dataset(*args)
    assert np.array_equal(a.stacked(), b.stacked())
    assert a.segment_ids == b.segment_ids


def test_non_event_regions_complement():
    from latentscope.ingest import EventRegion

    regs = non_event_regions(100, [EventRegion(10, 20), EventRegion(50, 60)])
    spans = [(r.start_sample, r.end_sample) for r in regs]
    assert spans == [(0, 10), (20, 50), (60, 100)]
