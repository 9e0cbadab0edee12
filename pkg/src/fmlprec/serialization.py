"""Versioned binary container shared by checkpoints and dataset caches.

Layout (all integers little-endian)::

    magic        8 bytes, e.g. b"FMLPCKPT"
    version      u8
    meta_len     u32, then meta_len bytes of UTF-8 "key=value" lines
    n_entries    u32
    entries      n_entries x (u16 name_len, name, u8 dtype tag, u8 rank, rank x u64 dims)
    payload      raw little-endian arrays in manifest order

Metadata keys are written sorted so equal content gives identical bytes.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

FORMAT_VERSION = 1
DTYPE_TAGS = {0: np.dtype("<f8"), 1: np.dtype("<f4"), 2: np.dtype("<i8"), 3: np.dtype("u1")}
_TAG_OF = {("f", 8): 0, ("f", 4): 1, ("i", 8): 2, ("u", 1): 3, ("b", 1): 3}


def _tag(a: np.ndarray) -> int:
    try:
        return _TAG_OF[(a.dtype.kind, a.dtype.itemsize)]
    except KeyError:
        raise FormatError(f"unsupported dtype {a.dtype}") from None


def dump(path, magic: bytes, meta: dict[str, str], arrays: dict[str, np.ndarray]) -> None:
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    lines = []
    for k in sorted(meta):
        v = str(meta[k])
        if "\n" in k or "=" in k or "\n" in v:
            raise ValueError(f"metadata entry {k!r} not representable")
        lines.append(f"{k}={v}")
    meta_bytes = "\n".join(lines).encode()
    parts = [magic, struct.pack("<BI", FORMAT_VERSION, len(meta_bytes)), meta_bytes]
    parts.append(struct.pack("<I", len(arrays)))
    payload = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        tag = _tag(arr)
        arr = np.ascontiguousarray(arr, dtype=DTYPE_TAGS[tag])
        nb = name.encode()
        parts.append(struct.pack("<H", len(nb)) + nb + struct.pack("<BB", tag, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        payload.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts + payload))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError("file truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load(path, magic: bytes) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Read a container written by :func:`dump`; raises :class:`FormatError`."""
    r = _Reader(Path(path).read_bytes())
    if r.take(8) != magic:
        raise FormatError(f"bad magic, expected {magic!r}")
    version, meta_len = r.unpack("<BI")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    try:
        text = r.take(meta_len).decode()
    except UnicodeDecodeError:
        raise FormatError("metadata is not UTF-8") from None
    meta = {}
    for line in filter(None, text.split("\n")):
        k, sep, v = line.partition("=")
        if not sep:
            raise FormatError(f"bad metadata line {line!r}")
        meta[k] = v
    (count,) = r.unpack("<I")
    manifest = []
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        tag, rank = r.unpack("<BB")
        if tag not in DTYPE_TAGS:
            raise FormatError(f"unknown dtype tag {tag}")
        dims = r.unpack(f"<{rank}Q")
        manifest.append((name, DTYPE_TAGS[tag], dims))
    arrays = {}
    for name, dtype, dims in manifest:
        nbytes = dtype.itemsize * int(np.prod(dims, dtype=np.int64))
        arrays[name] = np.frombuffer(r.take(nbytes), dtype=dtype).reshape(dims).copy()
    if r.pos != len(r.buf):
        raise FormatError("trailing bytes after payload")
    return meta, arrays
