"""Hyperspectral cube container and the HKC1/HKL1 binary formats.

HKC1 cube file layout (all integers and floats little-endian):

    bytes 0-3   magic b"HKC1"
    3 x uint32  H, W, C
    C  x f32    band wavelengths in nanometers
    HWC x f32   samples, band-sequential (band-major, row-major per band)

HKL1 label raster layout:

    bytes 0-3   magic b"HKL1"
    2 x uint32  H, W
    HW x uint16 class ids, 0 = unlabeled
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CUBE_MAGIC = b"HKC1"
LABEL_MAGIC = b"HKL1"

# EnMAP-like cubes carry wavelengths inside this interval.
ENMAP_RANGE_NM = (420.0, 2450.0)


class CubeFormatError(ValueError):
    """Raised when a cube or label file does not conform to its format."""


@dataclass
class HyperCube:
    """An H x W x C reflectance volume with per-band wavelengths.

    ``data`` is float32 with shape (H, W, C); ``wavelengths_nm`` is float32
    with shape (C,) and strictly increasing.
    """

    data: np.ndarray
    wavelengths_nm: np.ndarray
    cube_id: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.wavelengths_nm = np.ascontiguousarray(
            self.wavelengths_nm, dtype=np.float32
        )
        self.validate()

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    def validate(self, enmap_like: bool = False) -> None:
        if self.data.ndim != 3:
            raise ValueError(f"cube data must be 3-D (H, W, C), got ndim={self.data.ndim}")
        if min(self.data.shape) < 1:
            raise ValueError(f"cube extents must be >= 1, got {self.data.shape}")
        if self.wavelengths_nm.ndim != 1 or self.wavelengths_nm.shape[0] != self.bands:
            raise ValueError(
                f"wavelengths length {self.wavelengths_nm.shape} does not match "
                f"band count {self.bands}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("cube data contains non-finite samples")
        if not np.all(np.isfinite(self.wavelengths_nm)):
            raise ValueError("wavelengths contain non-finite values")
        if self.bands > 1 and not np.all(np.diff(self.wavelengths_nm) > 0):
            raise ValueError("wavelengths must be strictly increasing")
        if enmap_like:
            lo, hi = ENMAP_RANGE_NM
            w = self.wavelengths_nm
            if w[0] < lo or w[-1] > hi:
                raise ValueError(
                    f"EnMAP-like cube wavelengths must lie within [{lo}, {hi}] nm, "
                    f"got [{w[0]}, {w[-1]}]"
                )

    def equals(self, other: "HyperCube") -> bool:
        return (
            self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
            and np.array_equal(self.wavelengths_nm, other.wavelengths_nm)
        )


def cube_to_bytes(cube: HyperCube) -> bytes:
    """Serialize ``cube`` to the HKC1 wire format."""
    header = CUBE_MAGIC + struct.pack(
        "<III", cube.height, cube.width, cube.bands
    )
    wl = cube.wavelengths_nm.astype("<f4").tobytes()
    # band-sequential: (C, H, W) in file order
    samples = np.ascontiguousarray(
        cube.data.transpose(2, 0, 1), dtype="<f4"
    ).tobytes()
    return header + wl + samples


def cube_from_bytes(raw: bytes, name: str = "<bytes>") -> HyperCube:
    """Parse one HKC1 record. Raises :class:`CubeFormatError` with a distinct
    diagnostic for bad magic, truncation, payload-size mismatch, or
    non-increasing wavelengths; ``name`` prefixes every message."""
    if len(raw) < 4 or raw[:4] != CUBE_MAGIC:
        raise CubeFormatError(f"{name}: bad magic {raw[:4]!r}, expected {CUBE_MAGIC!r}")
    if len(raw) < 16:
        raise CubeFormatError(f"{name}: truncated header ({len(raw)} bytes)")
    h, w, c = struct.unpack("<III", raw[4:16])
    if min(h, w, c) < 1:
        raise CubeFormatError(f"{name}: invalid dimensions H={h} W={w} C={c}")
    expected = 16 + 4 * c + 4 * h * w * c
    if len(raw) < expected:
        raise CubeFormatError(
            f"{name}: truncated payload, {len(raw)} bytes < expected {expected}"
        )
    if len(raw) > expected:
        raise CubeFormatError(
            f"{name}: payload size mismatch, {len(raw)} bytes, expected {expected} "
            f"for H={h} W={w} C={c}"
        )
    wl = np.frombuffer(raw, dtype="<f4", count=c, offset=16)
    if c > 1 and not np.all(np.diff(wl.astype(np.float64)) > 0):
        raise CubeFormatError(f"{name}: wavelengths not strictly increasing")
    samples = np.frombuffer(raw, dtype="<f4", count=h * w * c, offset=16 + 4 * c)
    if not np.all(np.isfinite(samples)):
        raise CubeFormatError(f"{name}: non-finite samples in payload")
    data = samples.reshape(c, h, w).transpose(1, 2, 0)
    return HyperCube(data=data.copy(), wavelengths_nm=wl.copy(), cube_id=name)


def save_cube(cube: HyperCube, path: str | Path) -> None:
    """Write ``cube`` to ``path`` in the HKC1 format."""
    cube.validate()
    Path(path).write_bytes(cube_to_bytes(cube))


def load_cube(path: str | Path) -> HyperCube:
    """Read an HKC1 file; see :func:`cube_from_bytes` for the diagnostics."""
    return cube_from_bytes(Path(path).read_bytes(), str(path))


def labels_to_bytes(labels: np.ndarray) -> bytes:
    """Serialize an (H, W) uint16 class-id raster to the HKL1 wire format."""
    labels = np.ascontiguousarray(labels, dtype="<u2")
    if labels.ndim != 2:
        raise ValueError(f"label raster must be 2-D, got ndim={labels.ndim}")
    h, w = labels.shape
    return LABEL_MAGIC + struct.pack("<II", h, w) + labels.tobytes()


def save_labels(labels: np.ndarray, path: str | Path) -> None:
    """Write an (H, W) uint16 class-id raster to ``path`` in HKL1 format."""
    Path(path).write_bytes(labels_to_bytes(labels))


def load_labels(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != LABEL_MAGIC:
        raise CubeFormatError(f"{path}: bad magic {raw[:4]!r}, expected {LABEL_MAGIC!r}")
    if len(raw) < 12:
        raise CubeFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    h, w = struct.unpack("<II", raw[4:12])
    expected = 12 + 2 * h * w
    if len(raw) != expected:
        raise CubeFormatError(
            f"{path}: payload size mismatch, {len(raw)} bytes, expected {expected}"
        )
    labels = np.frombuffer(raw, dtype="<u2", count=h * w, offset=12)
    return labels.reshape(h, w).copy()
