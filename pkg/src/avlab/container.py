"""Binary tensor container (AVTC).

A container file stores a set of named float32 tensors plus string
metadata.  Layout, all multi-byte integers little-endian:

    bytes 0..7    magic ``AVTC0001``
    bytes 8..15   u64 header length ``n``
    bytes 16..16+n-1  UTF-8 JSON header
    remainder     concatenated raw ``<f4`` payloads, C order,
                  in header order

Header schema::

    {"tensors": [{"name": str, "dtype": "f32", "shape": [int, ...]}, ...],
     "meta": {str: str, ...}}

Round trips are bit-exact: ``read_container(write_container(...))``
returns the same bytes for every float32 payload, including non-finite
values.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ContainerFormatError

MAGIC = b"AVTC0001"
_HEADER_LEN_BYTES = 8


def write_container(path, tensors: dict[str, np.ndarray], meta: dict[str, str] | None = None) -> None:
    """Write named float32 tensors and string metadata to ``path``."""
    meta = dict(meta or {})
    names = list(tensors.keys())
    if len(set(names)) != len(names):
        raise ValueError("tensor names must be unique")
    for k, v in meta.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise ValueError(f"meta entries must be str -> str, got {k!r}: {v!r}")

    entries = []
    payloads = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype != np.float32:
            raise ValueError(f"tensor {name!r} must be float32, got {arr.dtype}")
        if any(s <= 0 for s in arr.shape):
            raise ValueError(f"tensor {name!r} has a non-positive dimension: {arr.shape}")
        entries.append({"name": name, "dtype": "f32", "shape": list(arr.shape)})
        payloads.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    header = json.dumps({"tensors": entries, "meta": meta}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(_HEADER_LEN_BYTES, "little"))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)


def read_container(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read a container written by :func:`write_container`.

    Raises :class:`ContainerFormatError` (with a byte offset) on bad
    magic, a truncated file, or a payload whose size disagrees with the
    declared shapes.
    """
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise ContainerFormatError(f"bad magic, expected {MAGIC!r}", 0)
    pos = len(MAGIC)
    if len(raw) < pos + _HEADER_LEN_BYTES:
        raise ContainerFormatError("truncated header length field", pos)
    header_len = int.from_bytes(raw[pos : pos + _HEADER_LEN_BYTES], "little")
    pos += _HEADER_LEN_BYTES
    if len(raw) < pos + header_len:
        raise ContainerFormatError(f"truncated header, declared {header_len} bytes", pos)
    try:
        header = json.loads(raw[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerFormatError(f"unparseable header: {exc}", pos) from exc
    pos += header_len

    if not isinstance(header, dict) or "tensors" not in header or "meta" not in header:
        raise ContainerFormatError("header missing 'tensors'/'meta' keys", pos - header_len)

    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        name, dtype, shape = entry["name"], entry["dtype"], tuple(entry["shape"])
        if dtype != "f32":
            raise ContainerFormatError(f"tensor {name!r}: unsupported dtype {dtype!r}", pos)
        if name in tensors:
            raise ContainerFormatError(f"duplicate tensor name {name!r}", pos)
        nbytes = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
        if len(raw) < pos + nbytes:
            raise ContainerFormatError(
                f"truncated payload for tensor {name!r}, need {nbytes} bytes", pos
            )
        flat = np.frombuffer(raw[pos : pos + nbytes], dtype="<f4")
        tensors[name] = flat.reshape(shape).astype(np.float32, copy=True)
        pos += nbytes
    if pos != len(raw):
        raise ContainerFormatError(f"{len(raw) - pos} trailing bytes after last payload", pos)
    return tensors, dict(header["meta"])
