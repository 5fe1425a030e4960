"""Raw tri-axial streams -> smoothed, windowed, discretized segments."""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError

log = logging.getLogger("harkit.signal")

DEFAULT_SMOOTH_WIDTH = 3
DEFAULT_CLIP_BOUND = 20.0


@dataclass(frozen=True)
class ActivityLabel:
    """One class of the fixed, contiguously indexed label set."""

    index: int
    name: str


@dataclass(frozen=True)
class RawSample:
    """One timestamped tri-axial acceleration reading."""

    subject_id: str
    activity: ActivityLabel
    timestamp_ns: int
    ax: float
    ay: float
    az: float


@dataclass
class SegmentTensor:
    """A C-channel x w-sample window from a single subject-activity run.

    uid is assigned when a Dataset is assembled and identifies the segment
    across transfer/holdout bookkeeping.
    """

    channels: np.ndarray  # C x w float64
    label: ActivityLabel
    subject_id: str
    origin_index: int
    uid: int = -1

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def window(self) -> int:
        return self.channels.shape[1]


@dataclass
class DiscretizerSpec:
    """Bin count plus per-channel [lo, hi) value ranges fitted on training data."""

    bins: int
    ranges: np.ndarray  # C x 2 float64, column 0 = lo, column 1 = hi


def smooth(values, width: int) -> np.ndarray:
    """Centered moving average with edge replication.

    Virtual samples beyond each end repeat the end value, so the output keeps
    the input length. width must be odd and no longer than the sequence.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if width % 2 == 0 or width < 1:
        raise ValueError(f"smoothing width must be odd and positive, got {width}")
    if width > n:
        raise ValueError(f"smoothing width {width} exceeds sequence length {n}")
    if width == 1:
        return values.copy()
    half = width // 2
    padded = np.concatenate([np.full(half, values[0]), values, np.full(half, values[-1])])
    csum = np.concatenate([[0.0], np.cumsum(padded)])
    return (csum[width:] - csum[:-width]) / width


def smooth_stream(stream, width: int):
    """Smooth each axis of a single subject-activity run of RawSamples."""
    if width == 1:
        return list(stream)
    axes = [smooth([getattr(s, a) for s in stream], width) for a in ("ax", "ay", "az")]
    return [replace(s, ax=axes[0][i], ay=axes[1][i], az=axes[2][i])
            for i, s in enumerate(stream)]


def segment(stream, w: int, s: int):
    """Window one subject-activity run into SegmentTensors.

    Emits floor((N-w)/s)+1 segments with origins 0, s, 2s, ...; a run shorter
    than the window yields an empty list. The stream must be sorted by
    timestamp and contain a single subject and activity.
    """
    if w < 1 or s < 1:
        raise ValueError(f"window and stride must be >= 1, got w={w} s={s}")
    stream = list(stream)
    n = len(stream)
    if n < w:
        return []
    subjects = {x.subject_id for x in stream}
    activities = {x.activity for x in stream}
    if len(subjects) > 1 or len(activities) > 1:
        raise ValueError("segment() expects a single subject-activity run")
    data = np.array([[x.ax for x in stream], [x.ay for x in stream], [x.az for x in stream]])
    out = []
    for origin in range(0, n - w + 1, s):
        out.append(SegmentTensor(
            channels=np.ascontiguousarray(data[:, origin:origin + w]),
            label=stream[0].activity,
            subject_id=stream[0].subject_id,
            origin_index=origin,
        ))
    return out


def segment_count(n: int, w: int, s: int) -> int:
    """Number of windows segment() emits for a run of length n."""
    if n < w:
        return 0
    return (n - w) // s + 1


def fit_discretizer(segments, bins: int, clip_percentiles=(1.0, 99.0)) -> DiscretizerSpec:
    """Set per-channel ranges to empirical percentiles of the training values.

    A degenerate channel (all values equal) gets its range widened to
    [v-1e-6, v+1e-6] with a warning. The fitted ranges travel with the model
    checkpoint so target-domain data reuses the source ranges.
    """
    if bins < 2:
        raise ValueError(f"bin count must be >= 2, got {bins}")
    p_lo, p_hi = clip_percentiles
    if not 0.0 <= p_lo < p_hi <= 100.0:
        raise ValueError(f"bad clip percentiles {clip_percentiles}")
    segments = list(segments)
    if not segments:
        raise ValueError("cannot fit a discretizer on an empty training set")
    c = segments[0].num_channels
    ranges = np.empty((c, 2))
    for ch in range(c):
        vals = np.concatenate([seg.channels[ch] for seg in segments])
        lo, hi = np.percentile(vals, [p_lo, p_hi])
        if lo == hi:
            log.warning("channel %d is constant at %g; widening its range", ch, lo)
            lo, hi = lo - 1e-6, hi + 1e-6
        ranges[ch] = (lo, hi)
    return DiscretizerSpec(bins=bins, ranges=ranges)


def discretize(channels: np.ndarray, spec: DiscretizerSpec) -> np.ndarray:
    """Map channel values to integer bin ids, clamping out-of-range values.

    id = clamp(floor((v - lo) / (hi - lo) * B), 0, B-1), per channel.
    """
    channels = np.asarray(channels, dtype=np.float64)
    lo = spec.ranges[:, 0][:, None]
    hi = spec.ranges[:, 1][:, None]
    ids = np.floor((channels - lo) / (hi - lo) * spec.bins)
    return np.clip(ids, 0, spec.bins - 1).astype(np.int64)


def stack_channels(unit_segments) -> SegmentTensor:
    """Stack per-unit 3-channel segments into one segment with C = 3*U channels.

    The list order is the unit order: unit u (0-based), axis a in {x=0,y=1,z=2}
    lands on channel 3u+a. All units must share the window and alignment.
    """
    unit_segments = list(unit_segments)
    if not unit_segments:
        raise ValueError("stack_channels needs at least one unit segment")
    first = unit_segments[0]
    for i, seg in enumerate(unit_segments):
        if seg.window != first.window:
            raise DimensionError(
                f"unit {i} window axis is {seg.window}, expected {first.window}")
        if seg.origin_index != first.origin_index:
            raise DimensionError(
                f"unit {i} starts at sample {seg.origin_index}, expected {first.origin_index}")
    return SegmentTensor(
        channels=np.concatenate([seg.channels for seg in unit_segments], axis=0),
        label=first.label,
        subject_id=first.subject_id,
        origin_index=first.origin_index,
    )
