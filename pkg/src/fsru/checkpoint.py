"""Self-describing array container.

Layout::

    b"FSRUCKPT"                      8-byte magic
    uint64 little-endian             header length in bytes
    UTF-8 JSON header                {"arrays": [{"name", "shape", "offset"}, ...], "meta": {...}}
    payload                          concatenated little-endian float64 arrays, row-major

``offset`` counts bytes from the start of the payload.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"FSRUCKPT"


class CheckpointError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes):
    """Write to a temp file in the same directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(arrays: dict, meta: dict | None = None) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.nbytes
    header = json.dumps({"arrays": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def loads(blob: bytes) -> tuple:
    """Return ``(arrays, meta)``."""
    if blob[:8] != MAGIC:
        raise CheckpointError("not an FSRU checkpoint (bad magic)")
    if len(blob) < 16:
        raise CheckpointError("truncated header")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from exc
    payload = memoryview(blob)[16 + hlen:]
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise CheckpointError(f"array {entry['name']!r} runs past the end of the payload")
        arrays[entry["name"]] = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).copy()
    return arrays, header.get("meta", {})


def save(path, arrays: dict, meta: dict | None = None):
    atomic_write_bytes(path, dumps(arrays, meta))


def load(path) -> tuple:
    with open(path, "rb") as fh:
        return loads(fh.read())
