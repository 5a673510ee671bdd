"""Parameter checkpoints in the ``MTLB1`` binary layout.

Layout (all integers little-endian)::

    b"MTLB1"
    repeated until EOF:
        u32   name length in bytes
        bytes UTF-8 name
        u32   rank
        u64   dims[rank]
        f64   values[prod(dims)]   (row-major, little-endian)
"""
from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from ..errors import SchemaError

MAGIC = b"MTLB1"


def dumps(named_arrays):
    """Serialise an ordered mapping ``name -> array`` to bytes."""
    parts = [MAGIC]
    for name, arr in named_arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def loads(blob):
    if not blob.startswith(MAGIC):
        raise SchemaError("not an MTLB1 checkpoint (bad magic)")
    out = {}
    pos = len(MAGIC)
    end = len(blob)
    try:
        while pos < end:
            (nlen,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 8 * count > end:
                raise SchemaError(f"checkpoint truncated inside {name!r}")
            vals = np.frombuffer(blob, dtype="<f8", count=count, offset=pos)
            pos += 8 * count
            out[name] = vals.astype(np.float64).reshape(dims)
    except struct.error as exc:
        raise SchemaError(f"checkpoint truncated: {exc}") from None
    return out


def atomic_write(path, blob):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(path, named_arrays):
    atomic_write(path, dumps(named_arrays))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
