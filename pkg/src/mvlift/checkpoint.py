"""Self-describing model checkpoint container.

Binary layout (documented in the README):

* bytes 0-7: magic ``b"MVLCKPT\\x01"`` (last byte is the format version)
* bytes 8-15: header length ``n`` as little-endian uint64
* bytes 16..16+n: UTF-8 JSON header
* remainder: raw little-endian C-order float64 array data, concatenated in
  header manifest order

The header carries ``kind`` ("perceptron" or "integrator"), the model config,
the build seed, free-form metadata (e.g. view order for integrators), and an
``arrays`` manifest of name/shape/dtype/offset/nbytes entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, StorageError
from .integrator import IntegratorConfig, IntegratorModel, build_integrator
from .perceptron import PerceptronConfig, PerceptronModel, build_perceptron

MAGIC = b"MVLCKPT\x01"


@dataclass
class CheckpointData:
    kind: str
    config: dict
    seed: int
    metadata: dict
    arrays: dict[str, np.ndarray]


def _model_kind(model) -> str:
    if isinstance(model, PerceptronModel):
        return "perceptron"
    if isinstance(model, IntegratorModel):
        return "integrator"
    raise DataError(f"cannot checkpoint object of type {type(model).__name__}")


def save_checkpoint(path, model, metadata: dict | None = None) -> Path:
    """Write a model (config + named parameters) to one container file."""
    path = Path(path)
    kind = _model_kind(model)
    named = model.named_params()
    manifest = []
    offset = 0
    blobs = []
    for name, p in named:
        arr = np.ascontiguousarray(p.value, dtype="<f8")
        nbytes = arr.nbytes
        manifest.append({
            "name": name,
            "dtype": "<f8",
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": nbytes,
        })
        blobs.append(arr.tobytes())
        offset += nbytes
    header = {
        "kind": kind,
        "config": model.config.to_dict(),
        "seed": int(model.seed),
        "metadata": metadata or {},
        "arrays": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint64(len(header_bytes)).tobytes())
        f.write(header_bytes)
        for b in blobs:
            f.write(b)
    return path


def read_checkpoint(path) -> CheckpointData:
    path = Path(path)
    if not path.exists():
        raise StorageError(f"no checkpoint at {path}")
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise DataError(f"{path} is not a checkpoint (bad magic {magic!r})")
        (header_len,) = np.frombuffer(f.read(8), dtype="<u8")
        header = json.loads(f.read(int(header_len)).decode("utf-8"))
        body = f.read()
    arrays = {}
    for entry in header["arrays"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        raw = body[start:start + nbytes]
        if len(raw) != nbytes:
            raise DataError(f"checkpoint truncated at array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=entry["dtype"]).reshape(
            entry["shape"]).astype(np.float64)
    return CheckpointData(kind=header["kind"], config=header["config"],
                          seed=header["seed"], metadata=header["metadata"],
                          arrays=arrays)


def _fill_params(model, arrays: dict[str, np.ndarray]):
    named = dict(model.named_params())
    if set(named) != set(arrays):
        missing = set(named) - set(arrays)
        extra = set(arrays) - set(named)
        raise DataError(f"checkpoint parameter names do not match the model "
                        f"(missing {sorted(missing)}, unexpected {sorted(extra)})")
    for name, p in named.items():
        if p.value.shape != arrays[name].shape:
            raise DataError(f"parameter {name} has shape {arrays[name].shape} "
                            f"in checkpoint, expected {p.value.shape}")
        p.value[...] = arrays[name]


def load_perceptron(path) -> tuple[PerceptronModel, dict]:
    """Rebuild a perceptron from a checkpoint. Returns (model, metadata)."""
    data = read_checkpoint(path)
    if data.kind != "perceptron":
        raise DataError(f"{path} holds a {data.kind!r} checkpoint, expected "
                        f"a perceptron")
    model = build_perceptron(PerceptronConfig(**data.config), seed=data.seed)
    _fill_params(model, data.arrays)
    return model, data.metadata


def load_integrator(path) -> tuple[IntegratorModel, dict]:
    """Rebuild an integrator from a checkpoint. Returns (model, metadata)."""
    data = read_checkpoint(path)
    if data.kind != "integrator":
        raise DataError(f"{path} holds a {data.kind!r} checkpoint, expected "
                        f"an integrator")
    model = build_integrator(IntegratorConfig.from_dict(data.config),
                             seed=data.seed)
    _fill_params(model, data.arrays)
    return model, data.metadata
