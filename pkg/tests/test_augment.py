import numpy as np
import pytest

from hscl.contrastive.augment import (
    AugmentOp,
    AugmentationSpec,
    augment,
    default_augmentations,
)
from hscl.hsi.patches import Patch


def make_patch(rng, size=16, bands=4):
    return Patch(
        data=rng.random((size, size, bands), dtype=np.float32),
        source_row=0,
        source_col=0,
        source_cube_id="t",
    )


def test_empty_spec_is_identity(rng):
    patch = make_patch(rng)
    out = augment(patch, AugmentationSpec(), np.random.default_rng(0))
    assert np.array_equal(out.data, patch.data)


def test_hflip_twice_is_identity(rng):
    patch = make_patch(rng)
    spec = AugmentationSpec((AugmentOp("hflip", prob=1.0), AugmentOp("hflip", prob=1.0)))
    out = augment(patch, spec, np.random.default_rng(0))
    assert np.array_equal(out.data, patch.data)


def test_flips_and_rotation_move_pixels(rng):
    patch = make_patch(rng)
    for kind in ("hflip", "vflip", "rot90"):
        out = augment(patch, AugmentationSpec((AugmentOp(kind, prob=1.0),)),
                      np.random.default_rng(1))
        assert out.data.shape == patch.data.shape
        assert not np.array_equal(out.data, patch.data)


def test_noise_variance_near_sigma_squared(rng):
    patch = make_patch(rng, size=64, bands=8)
    spec = AugmentationSpec((AugmentOp("noise", sigma=0.01),))
    out = augment(patch, spec, np.random.default_rng(2))
    diff = (out.data - patch.data).astype(np.float64)
    var = diff.reshape(-1, 8).var(axis=0)
    assert np.all(var > 0.8e-4)
    assert np.all(var < 1.2e-4)


def test_full_scale_crop_is_identity(rng):
    patch = make_patch(rng)
    spec = AugmentationSpec((AugmentOp("crop", scale_range=(1.0, 1.0)),))
    out = augment(patch, spec, np.random.default_rng(3))
    assert np.allclose(out.data, patch.data, atol=1e-6)


def test_crop_preserves_shape_and_range(rng):
    patch = make_patch(rng)
    spec = AugmentationSpec((AugmentOp("crop", scale_range=(0.4, 0.8)),))
    out = augment(patch, spec, np.random.default_rng(4))
    assert out.data.shape == patch.data.shape
    assert out.data.min() >= patch.data.min() - 1e-6
    assert out.data.max() <= patch.data.max() + 1e-6


def test_band_dropout_zeroes_whole_bands(rng):
    patch = make_patch(rng, bands=16)
    spec = AugmentationSpec((AugmentOp("band_dropout", prob=0.5),))
    out = augment(patch, spec, np.random.default_rng(5))
    zeroed = np.all(out.data == 0, axis=(0, 1))
    kept = ~zeroed
    assert zeroed.any() and kept.any()
    assert np.array_equal(out.data[:, :, kept], patch.data[:, :, kept])


def test_ops_apply_in_listed_order(rng):
    patch = make_patch(rng)
    noise_then_drop = AugmentationSpec(
        (AugmentOp("noise", sigma=0.1), AugmentOp("band_dropout", prob=1.0))
    )
    out = augment(patch, noise_then_drop, np.random.default_rng(6))
    assert np.array_equal(out.data, np.zeros_like(patch.data))
    drop_then_noise = AugmentationSpec(
        (AugmentOp("band_dropout", prob=1.0), AugmentOp("noise", sigma=0.1))
    )
    out = augment(patch, drop_then_noise, np.random.default_rng(6))
    assert not np.array_equal(out.data, np.zeros_like(patch.data))


def test_deterministic_given_rng_key(rng):
    patch = make_patch(rng)
    spec = default_augmentations()
    a = augment(patch, spec, np.random.default_rng([7, 2, 0, 0, 1]))
    b = augment(patch, spec, np.random.default_rng([7, 2, 0, 0, 1]))
    c = augment(patch, spec, np.random.default_rng([7, 2, 0, 0, 2]))
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_validation():
    with pytest.raises(ValueError, match="unknown augmentation"):
        AugmentOp("sharpen")
    with pytest.raises(ValueError, match="probability"):
        AugmentOp("hflip", prob=1.5)
    with pytest.raises(ValueError, match="sigma"):
        AugmentOp("noise", sigma=-1.0)
    with pytest.raises(ValueError, match="scale range"):
        AugmentOp("crop", scale_range=(0.0, 1.0))
    with pytest.raises(ValueError, match="AugmentOp"):
        AugmentationSpec(("hflip",))
