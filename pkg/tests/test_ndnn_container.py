"""Tests for the binary container and model checkpoints."""

import numpy as np
import pytest

from ndnn.checkpoint import load_parameters, read_checkpoint, save_checkpoint
from ndnn.container import MAGIC, ArtifactError, read_container, write_container
from ndnn.layers import Mlp


class _TinyModel(Mlp):
    def architecture(self):
        return {"kind": "mlp", "in": self.in_features, "hidden": self.hidden, "out": self.out_features}


@pytest.fixture
def arrays(rng):
    return {
        "values": rng.normal(size=(3, 4)),
        "index": np.arange(5, dtype=np.int64),
        "flags": np.array([0, 1, 2], dtype=np.int8),
        "mask": np.array([True, False]),
    }


# --------------------------------------------------------------------------- #
# Container                                                                    #
# --------------------------------------------------------------------------- #


def test_container_round_trip(tmp_path, arrays):
    path = write_container(tmp_path / "a.bin", "test", {"note": "x", "n": 3}, arrays)
    assert path.read_bytes()[:8] == MAGIC
    metadata, loaded = read_container(path, expected_kind="test")
    assert metadata == {"note": "x", "n": 3}
    assert list(loaded) == list(arrays)
    for name, value in arrays.items():
        np.testing.assert_array_equal(loaded[name], value)
        assert loaded[name].dtype.kind == value.dtype.kind


def test_container_bytes_are_deterministic(tmp_path, arrays):
    first = write_container(tmp_path / "a.bin", "test", {"b": 1, "a": 2}, arrays)
    second = write_container(tmp_path / "b.bin", "test", {"a": 2, "b": 1}, arrays)
    assert first.read_bytes() == second.read_bytes()


def test_container_errors(tmp_path, arrays):
    path = write_container(tmp_path / "a.bin", "test", {}, arrays)
    with pytest.raises(ArtifactError, match="expected"):
        read_container(path, expected_kind="dataset")
    with pytest.raises(ArtifactError, match="not found"):
        read_container(tmp_path / "missing.bin")

    raw = path.read_bytes()
    (tmp_path / "cut.bin").write_bytes(raw[:-4])
    with pytest.raises(ArtifactError, match="truncated"):
        read_container(tmp_path / "cut.bin")
    (tmp_path / "junk.bin").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ArtifactError, match="magic"):
        read_container(tmp_path / "junk.bin")


def test_non_finite_metadata_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_container(tmp_path / "a.bin", "test", {"loss": float("nan")}, {})


# --------------------------------------------------------------------------- #
# Checkpoints                                                                  #
# --------------------------------------------------------------------------- #


def test_checkpoint_restores_predictions(tmp_path, rng):
    model = _TinyModel(4, 2, np.random.default_rng(0), hidden=5)
    path = save_checkpoint(tmp_path / "m.ckpt", model, {"bounds_hash": "abc"})
    header, params = read_checkpoint(path)
    assert header["architecture"] == {"kind": "mlp", "in": 4, "hidden": 5, "out": 2}
    assert header["bounds_hash"] == "abc"

    fresh = _TinyModel(4, 2, np.random.default_rng(99), hidden=5)
    load_parameters(fresh, params)
    x = rng.normal(size=(6, 4))
    np.testing.assert_array_equal(fresh.forward(x)[0], model.forward(x)[0])


def test_checkpoint_shape_mismatch(tmp_path):
    model = _TinyModel(4, 2, np.random.default_rng(0), hidden=5)
    _, params = read_checkpoint(save_checkpoint(tmp_path / "m.ckpt", model))
    with pytest.raises(ArtifactError, match="shape"):
        load_parameters(_TinyModel(4, 2, np.random.default_rng(0), hidden=6), params)
    del params["mlp.fc2.b"]
    with pytest.raises(ArtifactError, match="no parameter"):
        load_parameters(model, params)
