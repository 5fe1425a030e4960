import math

import numpy as np
import pytest

from conftest import make_segment, toy_config, toy_model, toy_separable_segments
from harkit.errors import ConfigError, DataError, DimensionError
from harkit.model import (ConvBlockConfig, NetworkConfig, _backward,
                          _forward_cached, build_network, forward, predict,
                          train)
from harkit.signal import DiscretizerSpec, fit_discretizer
from harkit.tensor import softmax_cross_entropy
from oracles import central_difference, max_rel_err


def default_paper_config():
    return NetworkConfig(channels=3, window=200, classes=6, bins=64, embed_dim=8,
                         blocks=(ConvBlockConfig(32, 5, 2, 0.5),
                                 ConvBlockConfig(64, 5, 2, 0.5)))


class TestBuildNetwork:
    def test_shape_algebra_and_parameter_counts(self):
        cfg = default_paper_config()
        assert cfg.layer_lengths() == [200, 196, 98, 94, 47]
        model = build_network(cfg, np.random.default_rng(0))
        sizes = {p.name: p.tensor.data.size for p in model.params}
        # recomputed from the count formulas:
        #   embedding B*E; conv F*(C_in*K)+F; classifier M*D+M
        assert sizes["embedding"] == 64 * 8 == 512
        assert sizes["conv1.kernels"] + sizes["conv1.bias"] == 32 * (24 * 5) + 32 == 3872
        assert sizes["conv2.kernels"] + sizes["conv2.bias"] == 64 * (32 * 5) + 64 == 10304
        assert sizes["classifier.W"] + sizes["classifier.b"] == 6 * (64 * 47) + 6 == 18054

    def test_zero_classifier_gives_ln_m_loss(self):
        segments = toy_separable_segments(classes=6, per_class=1)
        cfg = toy_config(classes=6)
        model = toy_model(segments, cfg)
        loss, _ = softmax_cross_entropy(forward(model, segments[0]), 0)
        assert abs(loss - math.log(6)) < 1e-12

    def test_shape_underflow_is_config_error(self):
        cfg = NetworkConfig(channels=3, window=8, classes=6,
                            blocks=(ConvBlockConfig(8, 5, 2, 0.0),
                                    ConvBlockConfig(8, 5, 2, 0.0)))
        with pytest.raises(ConfigError, match="block 1"):
            build_network(cfg, np.random.default_rng(0))

    def test_initializer_bounds(self):
        cfg = toy_config()
        model = build_network(cfg, np.random.default_rng(1))
        a = math.sqrt(6.0 / (cfg.bins + cfg.embed_dim))
        emb = model.param("embedding").tensor.data
        assert np.all(np.abs(emb) <= a)
        assert not model.param("conv1.bias").tensor.data.any()
        assert not model.param("classifier.W").tensor.data.any()


class TestForward:
    def test_eval_mode_deterministic(self, separable_problem):
        model, segments = separable_problem
        a = forward(model, segments[0]).data
        b = forward(model, segments[0]).data
        assert np.array_equal(a, b)

    def test_zero_classifier_scores_zero(self, separable_problem):
        model, segments = separable_problem
        assert not forward(model, segments[3]).data.any()

    def test_channel_mismatch(self, separable_problem):
        model, _ = separable_problem
        with pytest.raises(DimensionError, match="channels"):
            forward(model, make_segment(np.zeros((2, 12))))

    def test_window_mismatch(self, separable_problem):
        model, _ = separable_problem
        with pytest.raises(DimensionError, match="window"):
            forward(model, make_segment(np.zeros((1, 13))))


class TestTrain:
    def test_zero_epochs_noop(self, separable_problem):
        model, segments = separable_problem
        before = [p.tensor.data.tobytes() for p in model.params]
        cfg = toy_config(epochs=0)
        _, history = train(model, segments, cfg)
        assert history == []
        assert [p.tensor.data.tobytes() for p in model.params] == before

    def test_overfits_separable_set(self):
        segments = toy_separable_segments(classes=4, per_class=10)
        model = toy_model(segments)
        _, history = train(model, segments)
        assert history[-1] < 0.1 * math.log(4)
        hits = sum(predict(model, s).index == s.label.index for s in segments)
        assert hits == len(segments)

    def test_first_reported_loss_is_ln_m(self, separable_problem):
        model, segments = separable_problem
        _, history = train(model, segments, toy_config(epochs=2))
        assert abs(history[0] - math.log(4)) < 1e-12
        assert history[1] <= math.log(4) + 1e-6

    def test_missing_class_listed(self, separable_problem):
        model, segments = separable_problem
        partial = [s for s in segments if s.label.index != 2]
        with pytest.raises(DataError, match="class_2"):
            train(model, partial)

    def test_bit_identical_reruns(self):
        runs = []
        for _ in range(2):
            segments = toy_separable_segments()
            model = toy_model(segments)
            train(model, segments, toy_config(epochs=3))
            runs.append(b"".join(p.tensor.data.tobytes() for p in model.params))
        assert runs[0] == runs[1]

    def test_batch_order_insensitive_scores(self):
        # swapping two segments of the same batch only reorders the float
        # accumulation of the batch gradient; scores must agree to ~1e-8
        segments = toy_separable_segments()
        swapped = list(segments)
        swapped[0], swapped[1] = swapped[1], swapped[0]
        probe = segments[-1]
        scores = []
        for data in (segments, swapped):
            model = toy_model(data)
            train(model, data, toy_config(epochs=3))
            scores.append(forward(model, probe).data)
        assert np.allclose(scores[0], scores[1], rtol=1e-8, atol=1e-8)

    def test_frozen_parameters_never_move(self, separable_problem):
        model, segments = separable_problem
        model.param("embedding").frozen = True
        before = model.param("embedding").tensor.data.tobytes()
        train(model, segments, toy_config(epochs=2))
        assert model.param("embedding").tensor.data.tobytes() == before


class TestPredict:
    def test_tie_breaks_to_lowest_index(self, separable_problem):
        model, segments = separable_problem
        assert predict(model, segments[-1]).index == 0

    def test_argmax_of_bias_scores(self, separable_problem):
        model, segments = separable_problem
        model.param("classifier.b").tensor.data[:] = [0.1, 0.9, 0.3, 0.0]
        assert predict(model, segments[0]).index == 1

    def test_constant_bias_shift_invariant(self):
        segments = toy_separable_segments()
        model = toy_model(segments)
        train(model, segments, toy_config(epochs=5))
        before = [predict(model, s).index for s in segments]
        model.param("classifier.b").tensor.data += 13.7
        after = [predict(model, s).index for s in segments]
        assert before == after


class TestEndToEndGradient:
    def test_every_parameter_matches_central_differences(self):
        cfg = NetworkConfig(channels=1, window=12, classes=3, bins=4, embed_dim=2,
                            blocks=(ConvBlockConfig(2, 3, 2, 0.0),))
        rng = np.random.default_rng(17)
        seg = make_segment(rng.uniform(-1, 1, (1, 12)), label_index=1)
        disc = DiscretizerSpec(bins=4, ranges=np.array([[-1.0, 1.0]]))
        model = build_network(cfg, rng, discretizer=disc)
        # give the zero-initialized classifier some signal to differentiate
        model.param("classifier.W").tensor.data[:] = rng.uniform(
            -0.5, 0.5, model.param("classifier.W").tensor.shape)
        model.param("classifier.b").tensor.data[:] = rng.uniform(-0.5, 0.5, 3)
        names = {p.name for p in model.params}
        scores, cache = _forward_cached(model, seg, "train", None)
        _, dscores = softmax_cross_entropy(scores, 1)
        grads = _backward(model, cache, dscores, names)

        def loss_with(p, arr):
            saved = p.tensor.data.copy()
            p.tensor.data[:] = arr
            out = softmax_cross_entropy(forward(model, seg), 1)[0]
            p.tensor.data[:] = saved
            return out

        for p in model.params:
            fd = central_difference(lambda a, p=p: loss_with(p, a),
                                    p.tensor.data.copy())
            assert max_rel_err(grads[p.name], fd) < 1e-4, p.name
