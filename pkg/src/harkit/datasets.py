"""Dataset loading (WISDM text, SDA directory tree, generated CSV) and the
seeded synthetic generator with controllable inter-subject shift."""

import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError
from .signal import (DEFAULT_CLIP_BOUND, DEFAULT_SMOOTH_WIDTH, ActivityLabel,
                     RawSample, SegmentTensor, segment, smooth, smooth_stream)

log = logging.getLogger("harkit.datasets")

WISDM_LABELS = ("Walking", "Jogging", "Upstairs", "Downstairs", "Sitting", "Standing")
WISDM_WINDOW = 200
WISDM_STRIDE = 100
SYNTH_CSV_HEADER = ["subject", "activity", "timestamp_ns", "ax", "ay", "az"]


@dataclass
class Dataset:
    name: str
    subjects: list
    labels: list
    segments: list
    sample_rate_hz: float

    @property
    def num_channels(self) -> int:
        return self.segments[0].num_channels

    @property
    def window(self) -> int:
        return self.segments[0].window

    def for_subject(self, subject_id: str) -> list:
        return [s for s in self.segments if s.subject_id == subject_id]


def _finalize(name: str, labels, segments, rate: float) -> Dataset:
    segments = list(segments)
    if not segments:
        raise DataError(f"dataset {name!r} contains no segments")
    subjects = sorted({s.subject_id for s in segments})
    if len(subjects) < 2:
        raise DataError(
            f"dataset {name!r} has {len(subjects)} subject(s); "
            "leave-one-subject-out needs at least 2")
    label_by_index = {lab.index: lab for lab in labels}
    c, w = segments[0].channels.shape
    for i, seg in enumerate(segments):
        if seg.label.index not in label_by_index:
            raise DataError(f"segment {i} labeled outside the declared label set")
        if seg.channels.shape != (c, w):
            raise DataError(
                f"segment {i} has shape {seg.channels.shape}, expected {(c, w)}")
        seg.uid = i
    return Dataset(name=name, subjects=subjects, labels=list(labels),
                   segments=segments, sample_rate_hz=rate)


# ---------------------------------------------------------------------------
# WISDM raw text


def parse_wisdm_line(line: str, labels_by_name, clip: float = DEFAULT_CLIP_BOUND):
    """One 'user,activity,timestamp,x,y,z;' record, or None if malformed."""
    fields = line.strip().rstrip(";").split(",")
    if len(fields) != 6:
        return None
    user, activity, ts, xs, ys, zs = (f.strip() for f in fields)
    if not user or activity not in labels_by_name:
        return None
    try:
        ts_i = int(ts)
        ax, ay, az = float(xs), float(ys), float(zs)
    except ValueError:
        return None
    if not all(math.isfinite(v) for v in (ax, ay, az)):
        return None
    return RawSample(subject_id=user, activity=labels_by_name[activity],
                     timestamp_ns=ts_i,
                     ax=max(-clip, min(clip, ax)),
                     ay=max(-clip, min(clip, ay)),
                     az=max(-clip, min(clip, az)))


def format_wisdm_line(sample: RawSample) -> str:
    return (f"{sample.subject_id},{sample.activity.name},{sample.timestamp_ns},"
            f"{sample.ax!r},{sample.ay!r},{sample.az!r};")


def load_wisdm(path, window: int = WISDM_WINDOW, stride: int = WISDM_STRIDE,
               smooth_width: int = DEFAULT_SMOOTH_WIDTH) -> Dataset:
    """Parse WISDM-format raw text into windowed segments.

    Samples are grouped into contiguous (user, activity) runs in file order;
    each run is smoothed then windowed. Malformed lines are skipped and
    counted; more than 10% malformed aborts with a format error.
    """
    labels = [ActivityLabel(i, n) for i, n in enumerate(WISDM_LABELS)]
    by_name = {lab.name: lab for lab in labels}
    samples = []
    malformed = 0
    total = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            total += 1
            parsed = parse_wisdm_line(line, by_name)
            if parsed is None:
                malformed += 1
            else:
                samples.append(parsed)
    if total and malformed > 0.1 * total:
        raise FormatError(
            f"{malformed} of {total} lines malformed (>10%): {path}")
    if malformed:
        log.info("skipped %d malformed lines in %s", malformed, path)
    segments = _segment_runs(samples, window, stride, smooth_width)
    return _finalize("wisdm", labels, segments, rate=20.0)


def _segment_runs(samples, window, stride, smooth_width):
    """Split a sample list into contiguous (subject, activity) runs and window each."""
    segments = []
    run = []
    for s in samples:
        if run and (s.subject_id != run[-1].subject_id or s.activity != run[-1].activity):
            segments.extend(segment(smooth_stream(run, smooth_width), window, stride))
            run = []
        run.append(s)
    if run:
        segments.extend(segment(smooth_stream(run, smooth_width), window, stride))
    return segments


# ---------------------------------------------------------------------------
# SDA directory tree


def load_sda(root, smooth_width: int = DEFAULT_SMOOTH_WIDTH, units: int = 5,
             columns_per_unit: int = 9, acc_offset: int = 0,
             rows: int = 125) -> Dataset:
    """Load an activity/subject/segment-file directory tree.

    Every file must hold `rows` lines of units*columns_per_unit comma-separated
    values; the three accelerometer columns of unit u sit at
    u*columns_per_unit + acc_offset. Each file becomes one segment with
    3*units channels (unit u, axis a -> channel 3u+a).
    """
    cols = units * columns_per_unit
    activities = sorted(d for d in os.listdir(root)
                        if os.path.isdir(os.path.join(root, d)))
    if not activities:
        raise DataError(f"no activity directories under {root}")
    labels = [ActivityLabel(i, n) for i, n in enumerate(activities)]
    segments = []
    for lab in labels:
        act_dir = os.path.join(root, lab.name)
        for subject in sorted(d for d in os.listdir(act_dir)
                              if os.path.isdir(os.path.join(act_dir, d))):
            sub_dir = os.path.join(act_dir, subject)
            for fname in sorted(os.listdir(sub_dir)):
                fpath = os.path.join(sub_dir, fname)
                try:
                    data = np.loadtxt(fpath, delimiter=",", ndmin=2)
                except ValueError as exc:
                    raise FormatError(f"unparseable segment file {fpath}: {exc}") from exc
                if data.shape != (rows, cols):
                    raise FormatError(
                        f"{fpath}: expected {rows}x{cols} values, got {data.shape}")
                channels = np.empty((3 * units, rows))
                for u in range(units):
                    base = u * columns_per_unit + acc_offset
                    for a in range(3):
                        channels[3 * u + a] = smooth(data[:, base + a], smooth_width)
                segments.append(SegmentTensor(channels=channels, label=lab,
                                              subject_id=subject, origin_index=0))
    return _finalize("sda", labels, segments, rate=25.0)


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass
class SynthConfig:
    """Multi-subject sine-mixture generator with per-subject transforms.

    Channel c of activity m for subject s is
      A_s * sin(2*pi*f_m*t + phi_s + c*pi/6) + b_s + N(0, noise_std)
    with (A_s, phi_s, b_s) drawn per subject from the seeded generator. The
    per-subject transforms are what creates the personalization gap.
    """

    subjects: int = 6
    activities: int = 4
    segments_per_class: int = 12
    window: int = 64
    channels: int = 3
    sample_rate_hz: float = 20.0
    base_freqs_hz: tuple = ()  # empty -> 1..activities Hz
    amplitude_range: tuple = (0.5, 1.6)
    phase_range: tuple = (0.0, 2.0 * math.pi)
    bias_range: tuple = (-0.6, 0.6)
    noise_std: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not self.base_freqs_hz:
            self.base_freqs_hz = tuple(float(i + 1) for i in range(self.activities))
        self.base_freqs_hz = tuple(float(f) for f in self.base_freqs_hz)

    def validate(self) -> None:
        if self.subjects < 2:
            raise DataError(f"need at least 2 subjects, got {self.subjects}")
        if self.activities < 2:
            raise DataError(f"need at least 2 activities, got {self.activities}")
        if len(self.base_freqs_hz) != self.activities:
            raise DataError("one base frequency per activity is required")
        if self.segments_per_class < 1 or self.window < 1:
            raise DataError("segments_per_class and window must be positive")
        if self.channels != 3:
            raise DataError("the generator simulates one tri-axial unit; channels must be 3")
        for name in ("amplitude_range", "phase_range", "bias_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise DataError(f"{name} must be a finite (lo, hi) pair")
        if self.noise_std < 0:
            raise DataError("noise_std must be non-negative")

    def to_dict(self) -> dict:
        return {
            "subjects": self.subjects, "activities": self.activities,
            "segments_per_class": self.segments_per_class, "window": self.window,
            "channels": self.channels, "sample_rate_hz": self.sample_rate_hz,
            "base_freqs_hz": list(self.base_freqs_hz),
            "amplitude_range": list(self.amplitude_range),
            "phase_range": list(self.phase_range),
            "bias_range": list(self.bias_range),
            "noise_std": self.noise_std, "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "SynthConfig":
        cfg = SynthConfig(**{k: tuple(v) if isinstance(v, list) else v
                             for k, v in d.items()})
        cfg.validate()
        return cfg


def synth_subject_ids(config: SynthConfig) -> list:
    return [f"s{i + 1:02d}" for i in range(config.subjects)]


def synth_labels(config: SynthConfig) -> list:
    return [ActivityLabel(m, f"act{m + 1}") for m in range(config.activities)]


def synth_streams(config: SynthConfig) -> dict:
    """Raw per-subject sample streams, a pure function of the config."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    labels = synth_labels(config)
    amp = rng.uniform(*config.amplitude_range, config.subjects)
    phase = rng.uniform(*config.phase_range, config.subjects)
    bias = rng.uniform(*config.bias_range, config.subjects)
    tick_ns = round(1e9 / config.sample_rate_hz)
    n = config.segments_per_class * config.window
    t = np.arange(n) / config.sample_rate_hz
    streams = {}
    for s, subject in enumerate(synth_subject_ids(config)):
        stream = []
        clock = 0
        for m, lab in enumerate(labels):
            chans = np.empty((config.channels, n))
            for c in range(config.channels):
                wave = amp[s] * np.sin(
                    2.0 * math.pi * config.base_freqs_hz[m] * t
                    + phase[s] + c * math.pi / 6.0) + bias[s]
                chans[c] = wave + rng.normal(0.0, config.noise_std, n)
            for i in range(n):
                stream.append(RawSample(
                    subject_id=subject, activity=lab, timestamp_ns=clock,
                    ax=float(chans[0, i]), ay=float(chans[1, i]), az=float(chans[2, i])))
                clock += tick_ns
        streams[subject] = stream
    return streams


def synth_generate(config: SynthConfig,
                   smooth_width: int = DEFAULT_SMOOTH_WIDTH) -> Dataset:
    """Generate, smooth and window a synthetic dataset (stride = window)."""
    streams = synth_streams(config)
    segments = []
    for subject in synth_subject_ids(config):
        segments.extend(_segment_runs(streams[subject], config.window,
                                      config.window, smooth_width))
    return _finalize("synth", synth_labels(config), segments, config.sample_rate_hz)


def config_digest(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def save_synth(config: SynthConfig, out_dir) -> dict:
    """Write per-subject CSVs plus manifest.json; returns the manifest."""
    streams = synth_streams(config)
    os.makedirs(out_dir, exist_ok=True)
    for subject, stream in streams.items():
        with open(os.path.join(out_dir, f"{subject}.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SYNTH_CSV_HEADER)
            for s in stream:
                writer.writerow([s.subject_id, s.activity.name, s.timestamp_ns,
                                 repr(s.ax), repr(s.ay), repr(s.az)])
    manifest = {
        "dataset": "synth",
        "config": config.to_dict(),
        "config_digest": config_digest(config.to_dict()),
        "window": config.window,
        "stride": config.window,
        "sample_rate_hz": config.sample_rate_hz,
        "labels": [lab.name for lab in synth_labels(config)],
        "subjects": synth_subject_ids(config),
        "counts": {
            "subjects": config.subjects,
            "activities": config.activities,
            "segments": config.subjects * config.activities * config.segments_per_class,
            "samples_per_subject": config.activities * config.segments_per_class * config.window,
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def load_synth(data_dir, smooth_width: int = DEFAULT_SMOOTH_WIDTH) -> Dataset:
    """Load a save_synth() directory back into a Dataset."""
    manifest_path = os.path.join(data_dir, "manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable manifest {manifest_path}: {exc}") from exc
    labels = [ActivityLabel(i, n) for i, n in enumerate(manifest["labels"])]
    by_name = {lab.name: lab for lab in labels}
    window = int(manifest["window"])
    stride = int(manifest["stride"])
    segments = []
    for subject in manifest["subjects"]:
        fpath = os.path.join(data_dir, f"{subject}.csv")
        samples = []
        with open(fpath, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SYNTH_CSV_HEADER:
                raise FormatError(f"{fpath}: unexpected header {header}")
            for row in reader:
                if len(row) != 6:
                    raise FormatError(f"{fpath}: bad row {row}")
                if row[1] not in by_name:
                    raise FormatError(f"{fpath}: unknown activity {row[1]!r}")
                samples.append(RawSample(
                    subject_id=row[0], activity=by_name[row[1]],
                    timestamp_ns=int(row[2]), ax=float(row[3]),
                    ay=float(row[4]), az=float(row[5])))
        segments.extend(_segment_runs(samples, window, stride, smooth_width))
    return _finalize("synth", labels, segments, float(manifest["sample_rate_hz"]))


LOADERS = {"wisdm": load_wisdm, "sda": load_sda, "synth": load_synth}
