import numpy as np
import pytest

from Core.checkpoint import load_checkpoint, restore, save_checkpoint
from Core.errors import CheckpointError, CheckpointMismatchError
from Core.model import LosaModel
from tests.conftest import make_tiny_config


def test_round_trip(tmp_path):
    model = LosaModel(make_tiny_config(seed=2))
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(model, path, seed=2)
    header, tensors = load_checkpoint(path)
    assert header == {"seed": 2, "mode": "losa"}
    assert list(tensors) == [name for name, _ in model.named_parameters()]

    other = LosaModel(make_tiny_config(seed=5))
    restore(other, path)
    for (_, a), (_, b) in zip(model.named_parameters(), other.named_parameters()):
        assert np.array_equal(a.data, b.data)


def test_same_model_same_bytes(tmp_path):
    a, b = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
    save_checkpoint(LosaModel(make_tiny_config()), a, seed=0)
    save_checkpoint(LosaModel(make_tiny_config()), b, seed=0)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_mode_mismatch(tmp_path):
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(LosaModel(make_tiny_config(), mode="head_only"), path, seed=0)
    with pytest.raises(CheckpointMismatchError):
        restore(LosaModel(make_tiny_config()), path)


def test_layer_set_mismatch(tmp_path):
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(LosaModel(make_tiny_config()), path, seed=0)
    cfg = make_tiny_config()
    cfg.adapters.layers = [2]
    with pytest.raises(CheckpointMismatchError):
        restore(LosaModel(cfg.validate()), path)


def test_width_mismatch(tmp_path):
    path = str(tmp_path / "m.ckpt")
    save_checkpoint(LosaModel(make_tiny_config()), path, seed=0)
    cfg = make_tiny_config()
    cfg.head.tower = 1
    with pytest.raises(CheckpointMismatchError):
        restore(LosaModel(cfg.validate()), path)


def test_truncated_checkpoint(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(LosaModel(make_tiny_config()), str(path), seed=0)
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(CheckpointError):
        load_checkpoint(str(path))


def test_wrong_format(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"not-a-checkpoint\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(str(path))
