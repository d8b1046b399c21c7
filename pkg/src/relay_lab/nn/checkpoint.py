"""Binary checkpoint format.

Layout (all integers little-endian):

    bytes  0..9   magic "RELAYCKPT1"
    bytes 10..17  u64 manifest length in bytes
    manifest      UTF-8 JSON: {"meta": {...}, "tensors": [{name, shape,
                  dtype, offset, nbytes}, ...]}
    payload       raw little-endian tensor bytes at the stated offsets

`meta` carries model/optimizer configuration, step counters and anything
else JSON-serializable; tensors carry weights, optimizer moments and the
torch RNG state.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

MAGIC = b"RELAYCKPT1"

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
    torch.int32: "<i4",
    torch.int16: "<i2",
    torch.uint8: "|u1",
    torch.bool: "|b1",
}
_TORCH_DTYPES = {v: k for k, v in _DTYPES.items()}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, tensors: dict[str, torch.Tensor], meta: dict) -> None:
    path = Path(path)
    entries = []
    payload = bytearray()
    for name, tensor in tensors.items():
        t = tensor.detach().cpu().contiguous()
        if t.dtype not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {t.dtype} for tensor {name!r}")
        dtype = _DTYPES[t.dtype]
        raw = t.numpy().astype(np.dtype(dtype), copy=False).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(t.shape),
                "dtype": dtype,
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)
    manifest = json.dumps({"meta": meta, "tensors": entries}, sort_keys=True).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        f.write(bytes(payload))
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[dict[str, torch.Tensor], dict]:
    path = Path(path)
    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:10]!r}")
    (manifest_len,) = struct.unpack("<Q", blob[len(MAGIC) : len(MAGIC) + 8])
    manifest_start = len(MAGIC) + 8
    manifest_end = manifest_start + manifest_len
    try:
        manifest = json.loads(blob[manifest_start:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt manifest: {e}") from None
    payload = blob[manifest_end:]
    tensors: dict[str, torch.Tensor] = {}
    for entry in manifest["tensors"]:
        dtype = entry["dtype"]
        if dtype not in _TORCH_DTYPES:
            raise CheckpointError(f"unsupported dtype {dtype!r} in manifest")
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"tensor {entry['name']!r}: truncated payload")
        arr = np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(entry["shape"]).copy()
        tensors[entry["name"]] = torch.from_numpy(arr).to(_TORCH_DTYPES[dtype])
    return tensors, manifest["meta"]
