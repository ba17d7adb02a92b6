"""Format-compatible synthetic event recordings.

Each record is a multichannel sinusoid at the line frequency with one
class-specific disturbance injected over a random window, plus optional
Gaussian noise.  The base frequency is quantized so a cycle spans an
integer number of samples and the clean waveform is exactly periodic,
which keeps the cycle-difference detector silent on undisturbed data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .types import IngestError

DISTURBANCE_KINDS = (
    "amplitude_sag",
    "amplitude_swell",
    "oscillation_burst",
    "impulse_train",
)

PROVIDER1_COLUMNS = (
    "Current.Ia",
    "Current.Ib",
    "Current.Ic",
    "Voltage.Va",
    "Voltage.Vb",
    "Voltage.Vc",
)


@dataclass(frozen=True)
class ClassSpec:
    """One synthetic event class.

    channels_affected selects which channels carry the disturbance:
    "all", "first_half" (current-side), or "second_half" (voltage-side).
    onset_range_s bounds the disturbance start; event recorders are
    trigger-aligned, so a narrow range mimics real capture windows.
    magnitude_levels model discrete severity grades within a class
    (assigned round-robin across the class's records).
    """

    label_codes: tuple[str, ...]
    kind: str
    magnitude: float
    duration_range_s: tuple[float, float] = (0.2, 0.5)
    channels_affected: str = "all"
    onset_range_s: Optional[tuple[float, float]] = None  # None -> anywhere
    magnitude_levels: tuple[float, ...] = (1.0,)  # severity multipliers

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise IngestError(f"unknown disturbance kind {self.kind!r}")
        if self.magnitude <= 0:
            raise IngestError("disturbance magnitude must be positive")
        if self.channels_affected not in ("all", "first_half", "second_half"):
            raise IngestError(
                f"unknown channels_affected {self.channels_affected!r}"
            )


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator parameters.

    copies > 1 emits multiple recordings of each event instance (as when
    several recorders capture the same disturbance); copies share the
    event's class, severity, duration, and onset and differ only in
    measurement noise.
    """

    n_records: int
    channels: int = 6
    sample_rate_hz: float = 2000.0
    base_freq_hz: float = 60.0
    record_duration_s: float = 1.0
    classes: tuple[ClassSpec, ...] = ()
    noise_std: float = 0.02
    copies: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_records <= 0:
            raise IngestError("n_records must be positive")
        if self.channels <= 0:
            raise IngestError("channels must be positive")
        if self.copies < 1:
            raise IngestError("copies must be >= 1")


#: Default taxonomy shipped with synthetic datasets: two top-level
#: categories (equipment faults, power-quality disturbances).
DEFAULT_TAXONOMY_ROWS = [
    ("EQ", "Equipment", ""),
    ("EA", "Arcing", "EQ"),
    ("OU", "Jumper Failure", "EQ"),
    ("PQ", "Power Quality", ""),
    ("SAG", "Voltage Sag", "PQ"),
    ("SWL", "Voltage Swell", "PQ"),
    ("OSC", "Oscillation", "PQ"),
    ("IMP", "Impulse", "PQ"),
]


def default_classes() -> tuple[ClassSpec, ...]:
    """Three separable event classes with distinct channel footprints.

    Onsets cluster near the capture trigger (as in field recordings).
    """
    onset = (0.15, 0.25)
    levels = (0.5, 0.75, 1.0, 1.35, 1.8)
    return (
        ClassSpec(("SAG", "EA"), "amplitude_sag", 0.45, (0.3, 0.4), "all",
                  onset, levels),
        ClassSpec(("OSC",), "oscillation_burst", 0.8, (0.3, 0.4), "second_half",
                  onset, levels),
        ClassSpec(("IMP", "OU"), "impulse_train", 2.0, (0.3, 0.4), "first_half",
                  onset, levels),
    )


def _channel_names(channels: int) -> tuple[str, ...]:
    if channels == len(PROVIDER1_COLUMNS):
        return PROVIDER1_COLUMNS
    return tuple(f"ch_{i}" for i in range(channels))


def _base_waveform(spec: SyntheticSpec, n_samples: int) -> tuple[np.ndarray, int]:
    """Exactly periodic multichannel sinusoid; returns (waveform, cycle_len)."""
    cycle_len = int(round(spec.sample_rate_hz / spec.base_freq_hz))
    one_cycle = np.sin(2.0 * np.pi * np.arange(cycle_len) / cycle_len)
    reps = n_samples // cycle_len + 2
    channels = []
    for c in range(spec.channels):
        # roll the cycle (not the tiled signal) so every channel stays
        # exactly periodic from sample 0 with no wrap discontinuity
        shift = (c % 3) * (cycle_len // 3)
        amplitude = 1.0 if c < 3 else 0.8
        shifted = np.roll(one_cycle, -shift)
        channels.append(amplitude * np.tile(shifted, reps)[:n_samples])
    return np.stack(channels), cycle_len


def _channel_slice(selector: str, channels: int) -> slice:
    half = max(1, channels // 2)
    if selector == "first_half":
        return slice(0, half)
    if selector == "second_half":
        return slice(half, channels)
    return slice(0, channels)


def _inject(
    x: np.ndarray,
    cls: ClassSpec,
    window: tuple[int, int],
    cycle_len: int,
    rng: np.random.Generator,
) -> None:
    lo, hi = window
    rows = _channel_slice(cls.channels_affected, x.shape[0])
    magnitude = cls.magnitude
    if cls.kind == "amplitude_sag":
        x[rows, lo:hi] *= 1.0 - magnitude
    elif cls.kind == "amplitude_swell":
        x[rows, lo:hi] *= 1.0 + magnitude
    elif cls.kind == "oscillation_burst":
        t = np.arange(hi - lo)
        burst = magnitude * np.sin(2.0 * np.pi * 6.5 * t / cycle_len)
        x[rows, lo:hi] += burst
    elif cls.kind == "impulse_train":
        spike = magnitude * np.exp(-np.arange(5) / 2.0)
        for start in range(lo, hi - len(spike), cycle_len):
            x[rows, start : start + len(spike)] += spike
    else:  # pragma: no cover - guarded by ClassSpec
        raise IngestError(f"unknown disturbance kind {cls.kind!r}")


def _event_parameters(spec: SyntheticSpec, class_idx: int, event: int):
    """Severity, duration, and onset for one event instance.

    Drawn from an event-scoped stream so every recorder copy of the
    event shares them exactly.
    """
    cls = spec.classes[class_idx]
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, 1000 + class_idx, event])
    )
    n = int(round(spec.record_duration_s * spec.sample_rate_hz))
    cycle_len = int(round(spec.sample_rate_hz / spec.base_freq_hz))
    level = cls.magnitude_levels[event % len(cls.magnitude_levels)]

    lo_s, hi_s = cls.duration_range_s
    dur = int(rng.uniform(lo_s, hi_s) * spec.sample_rate_hz)
    dur = max(cycle_len, min(dur, n - 2 * cycle_len))
    if cls.onset_range_s is not None:
        lo = int(cls.onset_range_s[0] * spec.sample_rate_hz)
        hi = int(cls.onset_range_s[1] * spec.sample_rate_hz)
    else:
        lo, hi = cycle_len, n - dur - cycle_len
    lo = max(cycle_len, min(lo, n - 2 * cycle_len))
    dur = min(dur, n - lo - cycle_len)  # keep the window inside the record
    hi = min(hi, n - dur - cycle_len)
    start = int(rng.integers(lo, max(lo + 1, hi)))
    return cls.magnitude * level, (start, start + dur)


def _render_record(
    spec: SyntheticSpec, class_idx: int | None, event: int,
    rng: np.random.Generator
) -> np.ndarray:
    n = int(round(spec.record_duration_s * spec.sample_rate_hz))
    x, cycle_len = _base_waveform(spec, n)
    if class_idx is not None:
        cls = spec.classes[class_idx]
        magnitude, window = _event_parameters(spec, class_idx, event)
        effective = ClassSpec(
            label_codes=cls.label_codes,
            kind=cls.kind,
            magnitude=magnitude,
            duration_range_s=cls.duration_range_s,
            channels_affected=cls.channels_affected,
            onset_range_s=cls.onset_range_s,
            magnitude_levels=cls.magnitude_levels,
        )
        _inject(x, effective, window, cycle_len, rng)
    if spec.noise_std > 0:
        x += rng.normal(0.0, spec.noise_std, size=x.shape)
    return x


def generate_synthetic_dataset(spec: SyntheticSpec, out_dir: Union[str, Path]) -> Path:
    """Write records, taxonomy, label manifest, and a dataset manifest.

    Fully deterministic for a given spec (per-record RNG streams are
    spawned from the seed, so generation order does not matter).
    """
    out = Path(out_dir)
    records_dir = out / "records"
    records_dir.mkdir(parents=True, exist_ok=True)

    names = _channel_names(spec.channels)
    n = int(round(spec.record_duration_s * spec.sample_rate_hz))
    dt_us = 1e6 / spec.sample_rate_hz
    time_us = np.arange(n) * dt_us

    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_records)
    truth = []
    label_lines = []
    for i in range(spec.n_records):
        class_idx = i % len(spec.classes) if spec.classes else None
        within = i // len(spec.classes) if spec.classes else 0
        event = within // spec.copies
        copy = within % spec.copies
        rng = np.random.default_rng(seeds[i])
        x = _render_record(spec, class_idx, event, rng)
        record_id = f"rec_{i:04d}"
        path = records_dir / f"{record_id}.csv"
        header = ",".join(["Time µs", *names])
        table = np.column_stack([time_us, x.T])
        np.savetxt(
            path,
            table,
            delimiter=",",
            header=header,
            comments="",
            fmt="%.10g",
            encoding="utf-8",
        )
        tag = "|".join(spec.classes[class_idx].label_codes) if class_idx is not None else ""
        label_lines.append(f"{record_id}\t{tag}")
        levels = (
            len(spec.classes[class_idx].magnitude_levels)
            if class_idx is not None
            else 1
        )
        truth.append(
            {
                "record_id": record_id,
                "class_index": class_idx,
                "event_index": event,
                "copy": copy,
                "variant": event % levels,
                "tag": tag,
            }
        )

    (out / "taxonomy.tsv").write_text(
        "".join(f"{c}\t{n_}\t{p}\n" for c, n_, p in DEFAULT_TAXONOMY_ROWS),
        encoding="utf-8",
    )
    (out / "labels.tsv").write_text("".join(l + "\n" for l in label_lines), encoding="utf-8")

    cycle_len = int(round(spec.sample_rate_hz / spec.base_freq_hz))
    manifest = {
        "generator": "latentscope.synthetic",
        "n_records": spec.n_records,
        "channels": spec.channels,
        "channel_names": list(names),
        "sample_rate_hz": spec.sample_rate_hz,
        "base_freq_hz_requested": spec.base_freq_hz,
        "base_freq_hz_effective": spec.sample_rate_hz / cycle_len,
        "cycle_len_samples": cycle_len,
        "record_duration_s": spec.record_duration_s,
        "noise_std": spec.noise_std,
        "seed": spec.seed,
        "classes": [
            {
                "label_codes": list(c.label_codes),
                "kind": c.kind,
                "magnitude": c.magnitude,
                "duration_range_s": list(c.duration_range_s),
                "channels_affected": c.channels_affected,
                "onset_range_s": list(c.onset_range_s) if c.onset_range_s else None,
                "magnitude_levels": list(c.magnitude_levels),
            }
            for c in spec.classes
        ],
        "ground_truth": truth,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return out
