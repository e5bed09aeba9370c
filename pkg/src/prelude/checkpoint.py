"""Checkpoint container: JSON metadata + tensor index + raw float32 payload.

Layout (all integers little-endian):

    bytes 0..3    magic b"PRLC"
    bytes 4..7    format version, uint32
    bytes 8..15   header length in bytes, uint64
    header        UTF-8 JSON document:
                    format_version, config (the six model fields), vocab_id,
                    seed, phase, epoch, best_val_loss, lineage (list), and
                    tensors: [{name, shape, offset}] with offsets into the
                    payload, in write order
    payload       concatenated raw little-endian float32 tensor data

Round-trips are bit-exact: save(load(p)) reproduces the payload bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Model, ModelConfig

MAGIC = b"PRLC"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    vocab_id: str
    seed: int
    phase: str
    epoch: int
    best_val_loss: float | None
    lineage: list = field(default_factory=list)

    def model(self) -> Model:
        return Model(self.config, dict(self.params))


def save_checkpoint(path, model: Model, *, vocab_id: str, seed: int, phase: str,
                    epoch: int, best_val_loss: float | None,
                    lineage: list | None = None) -> None:
    path = Path(path)
    index = []
    blobs = []
    offset = 0
    for name, arr in model.params.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "vocab_id": vocab_id,
        "seed": int(seed),
        "phase": phase,
        "epoch": int(epoch),
        "best_val_loss": None if best_val_loss is None else float(best_val_loss),
        "lineage": lineage or [],
        "tensors": index,
    }
    hraw = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(hraw)))
        f.write(hraw)
        for raw in blobs:
            f.write(raw)
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        payload = f.read()
    config = ModelConfig.from_dict(header["config"])
    params = {}
    for ent in header["tensors"]:
        shape = tuple(ent["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = ent["offset"]
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=start)
        params[ent["name"]] = arr.reshape(shape).copy()
    return Checkpoint(
        config=config,
        params=params,
        vocab_id=header["vocab_id"],
        seed=header["seed"],
        phase=header["phase"],
        epoch=header["epoch"],
        best_val_loss=header["best_val_loss"],
        lineage=header.get("lineage", []),
    )


def checkpoint_hash(path) -> str:
    """SHA-256 of the full file; recorded as transfer lineage."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
