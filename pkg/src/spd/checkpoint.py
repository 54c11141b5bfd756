"""Binary checkpoint container.

Layout: magic ``SPD1`` | uint32-LE header length | UTF-8 JSON header |
raw payload.  The header carries arbitrary metadata plus a manifest of
named arrays with shapes and payload offsets.  Float arrays are stored
as little-endian float64; boolean masks are bit-packed.  Round-trips are
bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InputError
from .model import EncoderModel, ModelConfig

MAGIC = b"SPD1"
FORMAT_VERSION = 1


def write_container(path, meta: dict, arrays: dict) -> None:
    """Write named arrays plus a JSON metadata block.

    float64 arrays go in verbatim; bool arrays are bit-packed.  Array
    order in the payload follows dict insertion order.
    """
    manifest = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.bool_:
            blob = np.packbits(arr.reshape(-1)).tobytes()
            dtype = "bitmask"
        elif arr.dtype == np.float64:
            blob = arr.astype("<f8", copy=False).tobytes()
            dtype = "f64"
        else:
            raise InputError(f"array {name!r}: unsupported dtype {arr.dtype}")
        manifest.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": dtype,
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)

    header = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": meta, "arrays": manifest},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(4, "little"))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def read_container(path):
    """Inverse of write_container: returns (meta, arrays)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise InputError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    header_len = int.from_bytes(raw[4:8], "little")
    header = json.loads(raw[8:8 + header_len].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported format version {header.get('format_version')}")
    base = 8 + header_len
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        blob = raw[start:start + entry["nbytes"]]
        shape = tuple(entry["shape"])
        if entry["dtype"] == "f64":
            arr = np.frombuffer(blob, dtype="<f8").astype(np.float64).reshape(shape)
        elif entry["dtype"] == "bitmask":
            n = int(np.prod(shape)) if shape else 1
            arr = np.unpackbits(np.frombuffer(blob, dtype=np.uint8), count=n)
            arr = arr.astype(np.bool_).reshape(shape)
        else:
            raise InputError(f"{path}: unknown dtype {entry['dtype']!r}")
        arrays[entry["name"]] = arr
    return header["meta"], arrays


# -- model snapshots -----------------------------------------------------


def save_model(path, model: EncoderModel, extra_meta: dict | None = None,
               masks: dict | None = None) -> None:
    """Model weights (+ optional pruning masks, bit-packed) in one file."""
    arrays = {name: t.data for name, t in model.named_params()}
    if masks:
        for name, m in masks.items():
            arrays[f"mask.{name}"] = np.asarray(m, dtype=np.bool_)
    meta = {"kind": "model", "config": model.cfg.to_dict()}
    if extra_meta:
        meta.update(extra_meta)
    write_container(path, meta, arrays)


def load_model(path):
    """Returns (model, meta, masks)."""
    meta, arrays = read_container(path)
    if meta.get("kind") != "model":
        raise InputError(f"{path}: not a model checkpoint (kind={meta.get('kind')!r})")
    cfg = ModelConfig(**meta["config"])
    model = EncoderModel(cfg)
    masks = {}
    for name, t in model.named_params():
        if name not in arrays:
            raise InputError(f"{path}: missing array {name!r}")
        if arrays[name].shape != t.shape:
            raise InputError(
                f"{path}: array {name!r} has shape {arrays[name].shape}, "
                f"model expects {t.shape}"
            )
        t.data = arrays[name]
    for name, arr in arrays.items():
        if name.startswith("mask."):
            masks[name[len("mask."):]] = arr
    return model, meta, masks
