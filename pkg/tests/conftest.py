import numpy as np
import pytest

from harkit.model import ConvBlockConfig, NetworkConfig, build_network
from harkit.signal import ActivityLabel, SegmentTensor, fit_discretizer


def make_segment(channels, label_index=0, label_name=None, subject="s01",
                 origin=0, uid=-1):
    channels = np.asarray(channels, dtype=np.float64)
    label = ActivityLabel(label_index, label_name or f"class_{label_index}")
    return SegmentTensor(channels=channels, label=label, subject_id=subject,
                         origin_index=origin, uid=uid)


def toy_separable_segments(classes=4, per_class=10, window=12, seed=0):
    """Linearly separated single-channel segments: one level band per class."""
    rng = np.random.default_rng(seed)
    segments = []
    for m in range(classes):
        base = (m + 0.5) / classes
        for i in range(per_class):
            vals = base + rng.uniform(-0.02, 0.02, (1, window))
            segments.append(make_segment(vals, label_index=m, uid=m * per_class + i))
    return segments


def toy_config(classes=4, window=12, **overrides):
    defaults = dict(channels=1, window=window, classes=classes, bins=8, embed_dim=2,
                    blocks=(ConvBlockConfig(4, 3, 2, 0.0),), learning_rate=1e-2,
                    epochs=30, batch_size=8, seed=7)
    defaults.update(overrides)
    return NetworkConfig(**defaults)


def toy_model(segments, config=None, seed=3):
    cfg = config or toy_config()
    disc = fit_discretizer(segments, cfg.bins)
    return build_network(cfg, np.random.default_rng(seed), discretizer=disc)


@pytest.fixture
def separable_problem():
    segments = toy_separable_segments()
    model = toy_model(segments)
    return model, segments
