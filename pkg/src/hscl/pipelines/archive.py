"""Patch archives: many HKC1 records in one file behind an index footer.

Layout, all integers little-endian:

    records     each patch serialized as a standalone HKC1 cube record,
                concatenated back to back from byte 0
    footer      magic b"HKIX"
                u32 patch count
                per patch: u64 record offset, u32 source row, u32 source col,
                           u16 class label, u16 reserved (zero)
                u64 footer offset (byte position of the b"HKIX" magic)

A reader seeks to the trailing u64, walks the index, and slices records;
record i ends where record i+1 (or the footer) begins. Labels use 0 for
unlabeled patches, matching the HKL1 raster convention.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hscl.hsi.cube import HyperCube, cube_from_bytes, cube_to_bytes
from hscl.hsi.patches import Patch
from hscl.pipelines.manifest import atomic_write_bytes

ARCHIVE_MAGIC = b"HKIX"
_ENTRY = struct.Struct("<QIIHH")


class ArchiveFormatError(ValueError):
    """Raised when an archive file does not conform to its format."""


@dataclass
class PatchArchive:
    """All patches of one extraction run, row-aligned with their labels."""

    patches: list
    labels: np.ndarray
    wavelengths_nm: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint16)
        self.wavelengths_nm = np.ascontiguousarray(self.wavelengths_nm, dtype=np.float32)
        if not self.patches:
            raise ValueError("archive needs at least one patch")
        if self.labels.shape != (len(self.patches),):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match "
                f"{len(self.patches)} patches"
            )
        shape = self.patches[0].data.shape
        for i, p in enumerate(self.patches):
            if p.data.shape != shape:
                raise ValueError(
                    f"patch {i} has shape {p.data.shape}, expected {shape}"
                )
        if self.wavelengths_nm.shape != (shape[2],):
            raise ValueError(
                f"wavelengths length {self.wavelengths_nm.shape} does not match "
                f"band count {shape[2]}"
            )

    @property
    def patch_size(self) -> int:
        return self.patches[0].size

    @property
    def bands(self) -> int:
        return self.patches[0].bands


def majority_label(window: np.ndarray) -> int:
    """Most frequent class id in a label window; ties go to the lower id."""
    w = np.asarray(window)
    if w.size == 0:
        raise ValueError("empty label window")
    flat = w.ravel().astype(np.int64)
    if np.any(flat < 0):
        raise ValueError("negative class id in label window")
    return int(np.bincount(flat).argmax())


def save_archive(path: str | Path, archive: PatchArchive) -> None:
    """Write ``archive`` to ``path``; the write is atomic (tmp then rename)."""
    if np.any(archive.labels > np.iinfo(np.uint16).max):
        raise ValueError("labels exceed the uint16 range")
    blobs = []
    entries = []
    offset = 0
    for patch, label in zip(archive.patches, archive.labels):
        record = cube_to_bytes(
            HyperCube(data=patch.data, wavelengths_nm=archive.wavelengths_nm)
        )
        entries.append(
            _ENTRY.pack(offset, patch.source_row, patch.source_col, int(label), 0)
        )
        blobs.append(record)
        offset += len(record)
    footer = ARCHIVE_MAGIC + struct.pack("<I", len(entries))
    payload = b"".join(blobs) + footer + b"".join(entries) + struct.pack("<Q", offset)
    atomic_write_bytes(path, payload)


def load_archive(path: str | Path) -> PatchArchive:
    """Read an archive; raises :class:`ArchiveFormatError` on any corruption."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ArchiveFormatError(f"{path}: truncated file ({len(raw)} bytes)")
    (footer_off,) = struct.unpack("<Q", raw[-8:])
    if footer_off + 8 + 8 > len(raw):
        raise ArchiveFormatError(f"{path}: footer offset {footer_off} out of range")
    if raw[footer_off : footer_off + 4] != ARCHIVE_MAGIC:
        raise ArchiveFormatError(
            f"{path}: bad index magic {raw[footer_off:footer_off + 4]!r}, "
            f"expected {ARCHIVE_MAGIC!r}"
        )
    (count,) = struct.unpack_from("<I", raw, footer_off + 4)
    expected_len = footer_off + 8 + count * _ENTRY.size + 8
    if len(raw) != expected_len:
        raise ArchiveFormatError(
            f"{path}: file is {len(raw)} bytes, index of {count} entries "
            f"expects {expected_len}"
        )
    if count == 0:
        raise ArchiveFormatError(f"{path}: archive holds no patches")

    entries = [
        _ENTRY.unpack_from(raw, footer_off + 8 + i * _ENTRY.size) for i in range(count)
    ]
    offsets = [e[0] for e in entries] + [footer_off]
    if offsets[0] != 0 or any(b <= a for a, b in zip(offsets, offsets[1:])):
        raise ArchiveFormatError(f"{path}: record offsets are not increasing from 0")

    patches = []
    labels = np.empty(count, dtype=np.uint16)
    wavelengths = None
    for i, (off, row, col, label, _pad) in enumerate(entries):
        cube = cube_from_bytes(raw[off : offsets[i + 1]], name=f"{path}[{i}]")
        if wavelengths is None:
            wavelengths = cube.wavelengths_nm
        elif not np.array_equal(cube.wavelengths_nm, wavelengths):
            raise ArchiveFormatError(f"{path}: record {i} disagrees on wavelengths")
        try:
            patches.append(
                Patch(
                    data=cube.data,
                    source_row=row,
                    source_col=col,
                    source_cube_id=str(path),
                )
            )
        except ValueError as exc:
            raise ArchiveFormatError(f"{path}: record {i}: {exc}") from exc
        labels[i] = label
    try:
        return PatchArchive(patches=patches, labels=labels, wavelengths_nm=wavelengths)
    except ValueError as exc:
        raise ArchiveFormatError(f"{path}: {exc}") from exc
