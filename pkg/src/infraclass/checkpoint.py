"""Binary checkpoint format shared by both architectures.

Layout: a UTF-8 JSON header, a single NUL byte, then raw little-endian
tensor bytes. The header looks like::

    {"format": "infraclass-checkpoint", "version": 1,
     "meta": {...},
     "tensors": [{"name": "...", "shape": [..], "dtype": "float32",
                  "offset": 0}, ...]}

Offsets count bytes from just past the NUL; tensors are contiguous in
listed order. ``meta`` carries whatever the caller stored - the model
builders put the architecture kind and its config there so a checkpoint
alone is enough to rebuild and load the network.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .errors import ConfigError, DataError

__all__ = ["save_checkpoint", "load_checkpoint", "model_meta",
           "build_from_meta", "save_model", "load_model"]

_FORMAT = "infraclass-checkpoint"
_VERSION = 1
_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


def save_checkpoint(path, state: dict, meta: dict = None) -> None:
    """Write name->array state with optional meta to the binary format."""
    entries = []
    blobs = []
    offset = 0
    for name, arr in state.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.name
        if dtype not in _DTYPES:
            raise DataError(f"tensor {name} has unsupported dtype {dtype}")
        raw = arr.astype(_DTYPES[dtype], copy=False).tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": dtype, "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = {"format": _FORMAT, "version": _VERSION, "meta": meta or {},
              "tensors": entries}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\0")
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path):
    """Read a checkpoint; returns (state dict, meta dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    sep = data.find(b"\0")
    if sep < 0:
        raise DataError(f"{path}: not a checkpoint (no header terminator)")
    try:
        header = json.loads(data[:sep].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad checkpoint header: {exc}") from None
    if header.get("format") != _FORMAT:
        raise DataError(f"{path}: unrecognized format {header.get('format')!r}")
    if header.get("version") != _VERSION:
        raise DataError(f"{path}: unsupported version {header.get('version')!r}")
    blob = data[sep + 1:]
    state = {}
    for entry in header["tensors"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        dtype = entry["dtype"]
        if dtype not in _DTYPES:
            raise DataError(f"{path}: tensor {name} has unsupported dtype "
                            f"{dtype}")
        count = 1
        for d in shape:
            count *= d
        try:
            arr = np.frombuffer(blob, dtype=_DTYPES[dtype], count=count,
                                offset=entry["offset"])
        except ValueError:
            raise DataError(f"{path}: tensor {name} truncated") from None
        state[name] = arr.reshape(shape).astype(dtype)
    return state, header.get("meta", {})


def model_meta(model, **extra) -> dict:
    """Architecture-identifying meta for a model instance."""
    from .inception import InceptionTimeNet
    from .resnet import SmallResNet

    if isinstance(model, InceptionTimeNet):
        kind = "inception_time"
    elif isinstance(model, SmallResNet):
        kind = "small_resnet"
    else:
        raise ConfigError(f"cannot describe model type {type(model).__name__}")
    meta = {"kind": kind, "config": asdict(model.cfg)}
    meta.update(extra)
    return meta


def build_from_meta(meta: dict, dtype=np.float32):
    """Fresh (randomly initialized) model matching a checkpoint's meta."""
    from .inception import InceptionConfig, build_inception_time
    from .resnet import ResNet2DConfig, build_small_resnet

    kind = meta.get("kind")
    config = dict(meta.get("config", {}))
    if kind == "inception_time":
        config["kernel_sizes"] = tuple(config.get("kernel_sizes", ()))
        return build_inception_time(InceptionConfig(**config), dtype=dtype)
    if kind == "small_resnet":
        config["stage_widths"] = tuple(config.get("stage_widths", ()))
        config["input_size"] = tuple(config.get("input_size", ()))
        return build_small_resnet(ResNet2DConfig(**config), dtype=dtype)
    raise DataError(f"checkpoint meta names unknown model kind {kind!r}")


def save_model(path, model, **extra) -> None:
    """Checkpoint a model with self-describing meta."""
    save_checkpoint(path, model.state_dict(), model_meta(model, **extra))


def load_model(path, dtype=np.float32):
    """Rebuild a model from a checkpoint; returns (model, meta)."""
    state, meta = load_checkpoint(path)
    model = build_from_meta(meta, dtype=dtype)
    model.load_state_dict(state)
    return model, meta
