"""Patch extraction over a regular overlapping grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hscl.hsi.cube import HyperCube


@dataclass
class Patch:
    """An S x S x C window of a parent cube."""

    data: np.ndarray
    source_row: int = 0
    source_col: int = 0
    source_cube_id: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"patch data must be 3-D (S, S, C), got {self.data.shape}")
        if self.data.shape[0] != self.data.shape[1]:
            raise ValueError(f"patches are square, got {self.data.shape[:2]}")
        if min(self.data.shape) < 1:
            raise ValueError(f"patch extents must be >= 1, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("patch data contains non-finite samples")

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def bands(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PatchGridSpec:
    """Regular tiling: stride = patch_size - round(overlap_fraction * patch_size).

    Rounding is half-up; trailing partial windows are dropped.
    """

    patch_size: int = 160
    overlap_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError(
                f"overlap_fraction must be in [0, 1), got {self.overlap_fraction}"
            )
        if self.stride < 1:
            raise ValueError(
                f"stride {self.stride} < 1 for patch_size={self.patch_size}, "
                f"overlap={self.overlap_fraction}"
            )

    @property
    def stride(self) -> int:
        return self.patch_size - int(math.floor(self.overlap_fraction * self.patch_size + 0.5))


def grid_positions(height: int, width: int, grid: PatchGridSpec) -> list[tuple[int, int]]:
    """Top-left corners of all full windows, row-major."""
    s, stride = grid.patch_size, grid.stride
    if height < s or width < s:
        raise ValueError(
            f"cube {height}x{width} smaller than patch size {s}"
        )
    rows = (height - s) // stride + 1
    cols = (width - s) // stride + 1
    return [(r * stride, c * stride) for r in range(rows) for c in range(cols)]


def extract_patches(cube: HyperCube, grid: PatchGridSpec) -> list[Patch]:
    """Tile ``cube`` into patches at the grid's stride, row-major order."""
    s = grid.patch_size
    return [
        Patch(
            data=cube.data[r : r + s, c : c + s, :].copy(),
            source_row=r,
            source_col=c,
            source_cube_id=cube.cube_id,
        )
        for r, c in grid_positions(cube.height, cube.width, grid)
    ]
