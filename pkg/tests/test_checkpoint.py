import numpy as np
import pytest

from conftest import toy_config, toy_model, toy_separable_segments
from harkit.checkpoint import (MAGIC, load_model, model_from_bytes,
                               model_to_bytes, save_model)
from harkit.errors import FormatError
from harkit.model import predict, train


@pytest.fixture
def trained():
    segments = toy_separable_segments()
    model = toy_model(segments)
    train(model, segments, toy_config(epochs=3))
    return model, segments


def test_round_trip_preserves_everything(trained, tmp_path):
    model, segments = trained
    path = tmp_path / "model.harm"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config
    assert [lab.name for lab in loaded.labels] == [lab.name for lab in model.labels]
    assert np.allclose(loaded.discretizer.ranges, model.discretizer.ranges)
    for a, b in zip(model.params, loaded.params):
        assert a.name == b.name and a.frozen == b.frozen
        # storage is float32; round-tripping through it must be exact
        assert np.array_equal(a.tensor.data.astype("<f4").astype(np.float64),
                              b.tensor.data)


def test_reload_of_saved_load_is_bit_identical(trained, tmp_path):
    model, _ = trained
    first = model_to_bytes(model)
    second = model_to_bytes(model_from_bytes(first))
    assert first == second


def test_round_trip_predictions_identical(trained, tmp_path):
    model, segments = trained
    reloaded = model_from_bytes(model_to_bytes(model))
    again = model_from_bytes(model_to_bytes(reloaded))
    for seg in segments:
        assert predict(reloaded, seg).index == predict(again, seg).index


def test_bad_magic(trained):
    model, _ = trained
    blob = bytearray(model_to_bytes(model))
    blob[:4] = b"NOPE"
    with pytest.raises(FormatError, match="magic"):
        model_from_bytes(bytes(blob))


def test_truncated_payload(trained):
    model, _ = trained
    blob = model_to_bytes(model)
    with pytest.raises(FormatError, match="truncated"):
        model_from_bytes(blob[:-10])


def test_trailing_garbage(trained):
    model, _ = trained
    with pytest.raises(FormatError, match="trailing"):
        model_from_bytes(model_to_bytes(model) + b"xx")


def test_frozen_flags_persisted(trained, tmp_path):
    model, _ = trained
    model.param("embedding").frozen = True
    loaded = model_from_bytes(model_to_bytes(model))
    assert loaded.param("embedding").frozen
    assert not loaded.param("classifier.W").frozen


def test_magic_constant():
    assert MAGIC == b"HARM"
