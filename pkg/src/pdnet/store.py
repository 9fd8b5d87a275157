"""Versioned binary container behind ``.pdnw`` weight files.

Layout (little-endian)::

    magic       4s   b"PDNW"
    version     u32
    header_len  u32
    header      header_len bytes of UTF-8 JSON (sorted keys); lists array shapes
    arrays      concatenated float64 blobs in header order
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"PDNW"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


def dumps(header: dict, arrays) -> bytes:
    header = dict(header, shapes=[list(np.shape(a)) for a in arrays])
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blobs = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return _PREFIX.pack(MAGIC, VERSION, len(text)) + text + blobs


def loads(data: bytes):
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(data) < _PREFIX.size:
        raise FormatError("truncated header", offset=len(data))
    _, version, size = _PREFIX.unpack_from(data)
    if version > VERSION:
        raise FormatError(
            f"weights format version {version} is newer than supported {VERSION}; "
            "upgrade pdnet to read it", offset=4)
    offset = _PREFIX.size
    if len(data) < offset + size:
        raise FormatError("truncated JSON header", offset=len(data))
    try:
        header = json.loads(data[offset:offset + size])
        shapes = [tuple(s) for s in header.pop("shapes")]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"corrupt JSON header: {exc}", offset=offset) from exc
    offset += size
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape, dtype=np.int64))
        if offset + 8 * count > len(data):
            raise FormatError("truncated array data", offset=len(data))
        arrays.append(np.frombuffer(data, "<f8", count, offset).astype(np.float64).reshape(shape))
        offset += 8 * count
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes", offset=offset)
    return header, arrays


def write(path, header, arrays):
    Path(path).write_bytes(dumps(header, arrays))


def read(path):
    return loads(Path(path).read_bytes())
