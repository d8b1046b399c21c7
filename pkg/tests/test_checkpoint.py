from __future__ import annotations

from pathlib import Path

import pytest
import torch

from relay_lab.armodel import ARConfig, ARModel
from relay_lab.looped import LoopedConfig, LoopedModel
from relay_lab.nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from relay_lab.training import load_model, save_model


def test_tensor_round_trip(tmp_path: Path) -> None:
    tensors = {
        "a": torch.randn(3, 4),
        "b": torch.randn(2, 2, dtype=torch.float64),
        "c": torch.arange(5, dtype=torch.int64),
        "rng": torch.randint(0, 255, (16,), dtype=torch.uint8),
    }
    meta = {"step": 7, "nested": {"x": [1, 2, 3]}}
    path = tmp_path / "t.ckpt"
    save_checkpoint(path, tensors, meta)
    back, meta_back = load_checkpoint(path)
    assert meta_back == meta
    for name, t in tensors.items():
        assert back[name].dtype == t.dtype
        assert torch.equal(back[name], t)


def test_bad_magic_rejected(tmp_path: Path) -> None:
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT__" + b"\x00" * 32)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_model_save_load_identical_outputs(tmp_path: Path) -> None:
    torch.manual_seed(0)
    model = LoopedModel(LoopedConfig(hidden=32, layers=1, heads=4, dropout=0.0))
    path = tmp_path / "m.ckpt"
    save_model(path, model)
    loaded = load_model(path)
    assert isinstance(loaded, LoopedModel)
    ids = torch.randint(5, 40, (2, 6))
    a = model.forward(ids, 2, train=False).answer_logits
    b = loaded.forward(ids, 2, train=False).answer_logits
    assert torch.equal(a, b)


def test_ar_model_round_trip_and_kind_dispatch(tmp_path: Path) -> None:
    torch.manual_seed(1)
    model = ARModel(ARConfig(hidden=32, layers=1, heads=4, dropout=0.0, max_seq_len=64))
    path = tmp_path / "ar.ckpt"
    save_model(path, model, extra_meta={"column": "ar-cot"})
    loaded = load_model(path)
    assert isinstance(loaded, ARModel)
    assert loaded.config.max_seq_len == 64


def test_save_is_deterministic(tmp_path: Path) -> None:
    torch.manual_seed(2)
    model = LoopedModel(LoopedConfig(hidden=16, layers=1, heads=4, dropout=0.0))
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_model(p1, model)
    save_model(p2, model)
    assert p1.read_bytes() == p2.read_bytes()
