"""Stochastic patch views for contrastive pretraining.

A view is built by applying the spec's ops in listed order, so the
composition is op_n(...op_2(op_1(x))).  Spatial extents survive every op
(crops are resized back) and the band count never changes (dropped bands
are zeroed, not removed).  Every random draw comes from the generator
passed in, making views a pure function of (patch, spec, rng state).
"""

from dataclasses import dataclass

import numpy as np

from hscl.hsi.patches import Patch

OP_KINDS = ("hflip", "vflip", "rot90", "crop", "noise", "band_dropout")


@dataclass(frozen=True)
class AugmentOp:
    kind: str
    prob: float = 1.0
    sigma: float = 0.0
    scale_range: tuple = (1.0, 1.0)

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}, expected one of {OP_KINDS}")
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"probability {self.prob} outside [0, 1]")
        if self.sigma < 0.0:
            raise ValueError(f"noise sigma {self.sigma} must be >= 0")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"crop scale range {self.scale_range} must sit inside (0, 1]")


@dataclass(frozen=True)
class AugmentationSpec:
    ops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if not isinstance(op, AugmentOp):
                raise ValueError(f"spec entries must be AugmentOp, got {type(op).__name__}")


def default_augmentations(noise_sigma=0.02, band_dropout=0.1, crop_scale=(0.6, 1.0)):
    return AugmentationSpec(
        ops=(
            AugmentOp("hflip", prob=0.5),
            AugmentOp("vflip", prob=0.5),
            AugmentOp("rot90", prob=0.5),
            AugmentOp("crop", scale_range=tuple(crop_scale)),
            AugmentOp("noise", sigma=noise_sigma),
            AugmentOp("band_dropout", prob=band_dropout),
        )
    )


def _bilinear_resize(data, out_h, out_w):
    # sample centers align as (o + 0.5) * in/out - 0.5, borders replicate
    h, w, _ = data.shape
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    wy = (ys - y0).astype(np.float32)
    wx = (xs - x0).astype(np.float32)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    top = data[y0c][:, x0c] * (1 - wx)[None, :, None] + data[y0c][:, x1c] * wx[None, :, None]
    bot = data[y1c][:, x0c] * (1 - wx)[None, :, None] + data[y1c][:, x1c] * wx[None, :, None]
    return top * (1 - wy)[:, None, None] + bot * wy[:, None, None]


def _apply_op(data, op, rng):
    size = data.shape[0]
    if op.kind == "hflip":
        if rng.random() < op.prob:
            data = data[:, ::-1, :]
    elif op.kind == "vflip":
        if rng.random() < op.prob:
            data = data[::-1, :, :]
    elif op.kind == "rot90":
        if rng.random() < op.prob:
            data = np.rot90(data, axes=(0, 1))
    elif op.kind == "crop":
        lo, hi = op.scale_range
        scale = rng.uniform(lo, hi)
        side = max(1, int(round(size * scale)))
        top = int(rng.integers(0, size - side + 1))
        left = int(rng.integers(0, size - side + 1))
        window = data[top : top + side, left : left + side, :]
        if side != size:
            data = _bilinear_resize(window, size, size)
        else:
            data = window
    elif op.kind == "noise":
        if op.sigma > 0:
            data = data + rng.normal(0.0, op.sigma, size=data.shape).astype(np.float32)
    elif op.kind == "band_dropout":
        keep = rng.random(data.shape[2]) >= op.prob
        data = data * keep[None, None, :].astype(np.float32)
    return data


def augment(patch, spec, rng):
    data = patch.data
    for op in spec.ops:
        data = _apply_op(data, op, rng)
    return Patch(
        data=np.ascontiguousarray(data, dtype=np.float32),
        source_row=patch.source_row,
        source_col=patch.source_col,
        source_cube_id=patch.source_cube_id,
    )
