"""Named-tensor checkpoint file.

Layout, all little-endian:
  magic "HKW1"
  u32 tensor count
  per tensor: u32 name length, UTF-8 name, u32 rank, u32 extents, f32 values
Values are stored float32 in row-major order, in the order given, so a
checkpoint written from the same state twice is byte-identical.
"""

import struct
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"HKW1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, named_arrays):
    """named_arrays: dict or iterable of (name, array), order preserved."""
    items = list(named_arrays.items()) if hasattr(named_arrays, "items") else list(named_arrays)
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(items))]
    for name, arr in items:
        arr = np.asarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"tensor {name!r} has non-finite values")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.astype("<f4", order="C").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise CheckpointError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    (count,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    out = {}
    for i in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset : offset + name_len].decode("utf-8")
            if len(raw) < offset + name_len:
                raise struct.error("short name")
            offset += name_len
            (rank,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            end = offset + 4 * size
            if len(raw) < end:
                raise struct.error("short values")
            values = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
            offset = end
        except (struct.error, UnicodeDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt tensor record {i}: {exc}") from exc
        if name in out:
            raise CheckpointError(f"{path}: duplicate tensor name {name!r}")
        out[name] = values.copy()
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return out
