"""Synthetic labeled hyperspectral cubes for desk-scale experiments.

A cube is a grid of square regions. Every region carries one class; pixels
draw the class's smooth endmember curve, modulated by a spatially smooth
multiplicative Gaussian gain field, a spatially smooth additive spectral
offset field, and per-pixel white Gaussian noise. All three nuisance terms
scale with ``noise_sigma``, so sigma 0 reproduces the pure endmembers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hscl.hsi.cube import HyperCube


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 8
    height: int = 256
    width: int = 256
    bands: int = 32
    noise_sigma: float = 0.01
    region_size: int = 32
    gain_amp: float = 3.0      # gain-field std, in units of noise_sigma
    offset_amp: float = 3.0    # offset-field per-band RMS, in units of noise_sigma
    gain_length: int = 16      # spatial correlation length of the gain field, pixels
    offset_length: int = 16    # spatial correlation length of the offset field, pixels

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.classes}")
        if self.bands < 4:
            raise ValueError(f"need at least 4 bands, got {self.bands}")
        if min(self.height, self.width) < 1:
            raise ValueError("cube extents must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if min(self.region_size, self.gain_length, self.offset_length) < 1:
            raise ValueError("region_size and correlation lengths must be >= 1")


def _smooth_curves(
    rng: np.random.Generator,
    count: int,
    bands: int,
    width_range: tuple[float, float] = (0.08, 0.35),
) -> np.ndarray:
    """Random smooth curves over the band axis: sums of 3 Gaussian bumps."""
    lam = np.linspace(0.0, 1.0, bands)
    amp = rng.uniform(-1.0, 1.0, size=(count, 3))
    mu = rng.uniform(0.0, 1.0, size=(count, 3))
    width = rng.uniform(*width_range, size=(count, 3))
    bumps = amp[:, :, None] * np.exp(
        -0.5 * ((lam[None, None, :] - mu[:, :, None]) / width[:, :, None]) ** 2
    )
    return bumps.sum(axis=1)


def _bilinear_upsample(field: np.ndarray, height: int, width: int) -> np.ndarray:
    """Upsample the leading two axes of a (gh, gw) or (gh, gw, C) grid."""
    gh, gw = field.shape[:2]
    yy = np.linspace(0.0, gh - 1.0, height)
    xx = np.linspace(0.0, gw - 1.0, width)
    y0 = np.minimum(yy.astype(np.int64), gh - 2)
    x0 = np.minimum(xx.astype(np.int64), gw - 2)
    tail = (1,) * (field.ndim - 2)
    wy = (yy - y0).reshape(height, 1, *tail)
    wx = (xx - x0).reshape(1, width, *tail)
    f00 = field[y0][:, x0]
    f01 = field[y0][:, x0 + 1]
    f10 = field[y0 + 1][:, x0]
    f11 = field[y0 + 1][:, x0 + 1]
    return (
        f00 * (1 - wy) * (1 - wx)
        + f01 * (1 - wy) * wx
        + f10 * wy * (1 - wx)
        + f11 * wy * wx
    )


def synth_cube(seed: int, spec: SynthSpec) -> tuple[HyperCube, np.ndarray]:
    """Generate a labeled cube. Fully deterministic for a fixed seed.

    Returns (cube, labels) where labels is an (H, W) uint16 raster of class
    ids 1..classes (0 is reserved for unlabeled pixels and never emitted).
    """
    rng = np.random.default_rng(seed)
    h, w, c, k = spec.height, spec.width, spec.bands, spec.classes
    sigma = spec.noise_sigma

    # class endmembers: one broad diffuse backbone shared by every class,
    # small broad class deviations, narrow random fine structure, and one
    # absorption line per class at a class-distinct wavelength slot
    common = _smooth_curves(rng, 1, c)
    dev = _smooth_curves(rng, k, c)
    base = common + (1.0 / 3.0) * dev
    fine = _smooth_curves(rng, k, c, width_range=(0.025, 0.06))
    lam = np.linspace(0.0, 1.0, c)
    centers = (rng.permutation(k) + 0.5 + rng.uniform(-0.2, 0.2, size=k)) / k
    depth = np.where(rng.random(k) < 0.5, -1.0, 1.0) * rng.uniform(0.3, 0.45, size=k)
    line_w = rng.uniform(0.035, 0.055, size=k)
    lines = depth[:, None] * np.exp(
        -0.5 * ((lam[None, :] - centers[:, None]) / line_w[:, None]) ** 2
    )
    # fine structure and lines sit outside the tanh so their contrast is
    # uniform across classes instead of fading where the backbone saturates
    endmembers = 0.5 + 0.3 * np.tanh(1.5 * base) + 0.15 * fine + lines
    endmembers = endmembers.astype(np.float32)

    # balanced class deck over the region grid
    bs = spec.region_size
    rows = -(-h // bs)
    cols = -(-w // bs)
    n_regions = rows * cols
    deck = np.tile(np.arange(1, k + 1, dtype=np.uint16), n_regions // k + 1)[:n_regions]
    rng.shuffle(deck)
    region_id = (
        np.repeat(np.arange(rows), bs)[:h, None] * cols
        + np.repeat(np.arange(cols), bs)[None, :w]
    )
    labels = deck[region_id]

    # spatially smooth additive spectral offset field, zero-mean unit-RMS
    # curves; spectrally broad, the way path radiance is, so narrow material
    # features stay uncontaminated
    oh = h // spec.offset_length + 2
    ow = w // spec.offset_length + 2
    curves = _smooth_curves(rng, oh * ow, c, width_range=(0.2, 0.5))
    curves -= curves.mean(axis=1, keepdims=True)
    rms = np.sqrt((curves**2).mean(axis=1, keepdims=True))
    curves /= np.maximum(rms, 1e-9)
    offset_field = _bilinear_upsample(curves.reshape(oh, ow, c), h, w)
    offset_field = offset_field.astype(np.float32)

    # spatially smooth multiplicative gain field, unit std
    gh = h // spec.gain_length + 2
    gw = w // spec.gain_length + 2
    coarse = rng.standard_normal((gh, gw))
    gain_field = _bilinear_upsample(coarse, h, w)
    gain_field = (gain_field - gain_field.mean()) / max(gain_field.std(), 1e-9)
    gain = (1.0 + spec.gain_amp * sigma * gain_field).astype(np.float32)

    white = rng.standard_normal((h, w, c), dtype=np.float32)

    # values are left unclipped: the fields are calibrated around [0, 1] but
    # clamping would erase structure exactly where the nuisances are strongest
    data = (
        gain[:, :, None] * endmembers[labels - 1]
        + np.float32(spec.offset_amp * sigma) * offset_field
        + np.float32(sigma) * white
    )

    wavelengths = np.linspace(420.0, 2450.0, c, dtype=np.float32)
    cube = HyperCube(data=data, wavelengths_nm=wavelengths, cube_id=f"synth-{seed}")
    return cube, labels.astype(np.uint16)
