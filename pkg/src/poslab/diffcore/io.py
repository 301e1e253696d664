"""Checkpoint files: one JSON header plus a little-endian float32 payload.

Layout: 8-byte little-endian uint64 header length, UTF-8 JSON header,
then the concatenated parameter payload. The header lists each tensor's
name, shape and byte offset into the payload, plus caller metadata.
Round-tripping float32 arrays is bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint"]

_FORMAT = "poslab-checkpoint-v1"


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = {
        "format": _FORMAT,
        "meta": meta or {},
        "payload_bytes": offset,
        "tensors": entries,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format") != _FORMAT:
            raise ValueError(f"unrecognized checkpoint format in {path}")
        payload = fh.read(header["payload_bytes"])
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count,
                            offset=entry["offset"]).reshape(shape)
        arrays[entry["name"]] = arr.copy()
    return arrays, header["meta"]
