import logging

import numpy as np
import pytest

from conftest import make_segment
from harkit.errors import DimensionError
from harkit.signal import (ActivityLabel, RawSample, discretize,
                           fit_discretizer, segment, segment_count, smooth,
                           smooth_stream, stack_channels)
from oracles import enumerate_window_origins, percentile_sorted


def make_stream(n, subject="s01", label=ActivityLabel(0, "walk"), seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((3, n))
    return [RawSample(subject, label, i * 50_000_000, vals[0, i], vals[1, i], vals[2, i])
            for i in range(n)]


class TestSmooth:
    def test_width_one_is_identity(self):
        x = np.random.default_rng(0).standard_normal(9)
        assert np.array_equal(smooth(x, 1), x)

    def test_constant_unchanged(self):
        assert np.allclose(smooth(np.full(7, 3.3), 3), 3.3, atol=1e-12)

    def test_replicated_edges_hand_example(self):
        got = smooth([1.0, 2.0, 3.0], 3)
        assert np.allclose(got, [4.0 / 3.0, 2.0, 8.0 / 3.0], atol=1e-12)

    def test_even_width_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            smooth([1.0, 2.0, 3.0], 2)

    def test_width_longer_than_sequence_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            smooth([1.0, 2.0], 3)

    def test_length_and_mean_preserved_for_constant(self):
        x = np.full(50, -0.7)
        got = smooth(x, 5)
        assert got.shape == x.shape
        assert abs(got.mean() - x.mean()) < 1e-9

    def test_smooth_stream_keeps_metadata(self):
        stream = make_stream(6)
        out = smooth_stream(stream, 3)
        assert [s.timestamp_ns for s in out] == [s.timestamp_ns for s in stream]
        assert np.allclose([s.ax for s in out], smooth([s.ax for s in stream], 3))


class TestSegment:
    def test_window_enumeration(self):
        segs = segment(make_stream(10), 4, 2)
        assert [s.origin_index for s in segs] == [0, 2, 4, 6]

    def test_exact_fit_yields_one(self):
        assert len(segment(make_stream(8), 8, 3)) == 1

    def test_short_run_yields_none(self):
        assert segment(make_stream(7), 8, 1) == []

    def test_copies_consecutive_samples(self):
        stream = make_stream(12, seed=5)
        seg = segment(stream, 5, 3)[1]
        assert seg.origin_index == 3
        expect = np.array([[s.ax for s in stream[3:8]],
                           [s.ay for s in stream[3:8]],
                           [s.az for s in stream[3:8]]])
        assert np.array_equal(seg.channels, expect)
        assert seg.subject_id == "s01" and seg.label.name == "walk"

    def test_mixed_stream_rejected(self):
        stream = make_stream(4) + make_stream(4, subject="s02")
        with pytest.raises(ValueError, match="single subject"):
            segment(stream, 2, 1)

    def test_count_formula_matches_enumeration_everywhere(self):
        for n in range(1, 201):
            for w in range(1, n + 1):
                for s in range(1, w + 1):
                    assert segment_count(n, w, s) == len(enumerate_window_origins(n, w, s))

    def test_op_matches_enumeration_on_sampled_shapes(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            n = int(rng.integers(1, 60))
            w = int(rng.integers(1, n + 1))
            s = int(rng.integers(1, w + 1))
            segs = segment(make_stream(n), w, s)
            assert [x.origin_index for x in segs] == enumerate_window_origins(n, w, s)


class TestDiscretizer:
    def test_full_range_percentiles(self):
        segs = [make_segment(np.linspace(-2.0, 2.0, 300).reshape(3, 100))]
        spec = fit_discretizer(segs, 16, clip_percentiles=(0, 100))
        for lo, hi in spec.ranges:
            assert lo == pytest.approx(min(lo, hi))
            assert spec.ranges.min() == -2.0 and spec.ranges.max() == 2.0

    def test_degenerate_channel_widened(self, caplog):
        segs = [make_segment(np.full((1, 10), 0.5))]
        with caplog.at_level(logging.WARNING, logger="harkit.signal"):
            spec = fit_discretizer(segs, 8)
        assert np.allclose(spec.ranges[0], [0.5 - 1e-6, 0.5 + 1e-6])
        assert "constant" in caplog.text

    def test_normal_percentiles_near_theoretical(self):
        vals = np.random.default_rng(12).standard_normal(1000)
        segs = [make_segment(vals.reshape(1, 1000))]
        spec = fit_discretizer(segs, 64, clip_percentiles=(1, 99))
        lo, hi = spec.ranges[0]
        assert abs(lo - (-2.326)) < 0.15 and abs(hi - 2.326) < 0.15
        # the library percentile agrees with a sort-based oracle
        assert lo == pytest.approx(percentile_sorted(vals, 1), abs=1e-9)
        assert hi == pytest.approx(percentile_sorted(vals, 99), abs=1e-9)

    def test_boundary_clamps(self):
        spec = fit_discretizer([make_segment(np.array([[0.0, 1.0]]))], 8,
                               clip_percentiles=(0, 100))
        ids = discretize(np.array([[0.0, 1.0, 11.0, -5.0]]), spec)
        assert ids.tolist() == [[0, 7, 7, 0]]

    def test_midpoint_bin(self):
        spec = fit_discretizer([make_segment(np.array([[-2.0, 2.0]]))], 64,
                               clip_percentiles=(0, 100))
        assert discretize(np.array([[0.0]]), spec).tolist() == [[32]]

    def test_fit_then_discretize_valid_and_monotone(self):
        rng = np.random.default_rng(7)
        segs = [make_segment(rng.standard_normal((2, 40))) for _ in range(5)]
        spec = fit_discretizer(segs, 16)
        for seg in segs:
            ids = discretize(seg.channels, spec)
            assert ids.min() >= 0 and ids.max() < 16
        grid = np.linspace(-4, 4, 200)[None, :]
        row = discretize(np.vstack([grid, grid]), spec)[0]
        assert np.all(np.diff(row) >= 0)


class TestStackChannels:
    def test_single_unit_order(self):
        seg = make_segment(np.arange(6.0).reshape(3, 2))
        out = stack_channels([seg])
        assert out.channels.shape == (3, 2)
        assert np.array_equal(out.channels, seg.channels)

    def test_five_units_give_fifteen_channels(self):
        segs = [make_segment(np.full((3, 4), float(u))) for u in range(5)]
        out = stack_channels(segs)
        assert out.channels.shape == (15, 4)

    def test_unit2_axis_z_is_channel_8(self):
        segs = [make_segment(np.arange(u * 3, u * 3 + 3, dtype=float)[:, None]
                             .repeat(4, axis=1)) for u in range(3)]
        out = stack_channels(segs)
        assert np.all(out.channels[8] == 8.0)

    def test_misaligned_windows_rejected(self):
        with pytest.raises(DimensionError, match="window"):
            stack_channels([make_segment(np.zeros((3, 4))),
                            make_segment(np.zeros((3, 5)))])
