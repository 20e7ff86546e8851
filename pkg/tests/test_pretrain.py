import numpy as np
import pytest

from hscl.contrastive.augment import AugmentOp, AugmentationSpec
from hscl.contrastive.pretrain import embed_patches, pretrain
from hscl.engine.backbone import Backbone, BackboneConfig, ProjectionHead
from hscl.hsi.patches import Patch

CONFIG = BackboneConfig(
    input_bands=3, patch_size=8, stage_channels=(4, 8), embedding_dim=8,
    projection_dim=4, cardinality=2,
)

SPEC = AugmentationSpec(
    (
        AugmentOp("hflip", prob=0.5),
        AugmentOp("crop", scale_range=(0.7, 1.0)),
        AugmentOp("noise", sigma=0.02),
    )
)


def make_patches(count=12, size=8, bands=3, seed=90):
    rng = np.random.default_rng(seed)
    return [
        Patch(
            data=rng.random((size, size, bands), dtype=np.float32),
            source_row=i,
            source_col=0,
            source_cube_id="toy",
        )
        for i in range(count)
    ]


def test_zero_epochs_returns_fresh_init():
    patches = make_patches()
    result = pretrain(patches, CONFIG, SPEC, epochs=0, batch_n=4, tau=0.5, seed=3)
    init = np.random.default_rng([3, 0])
    reference = Backbone(CONFIG, init)
    ProjectionHead(CONFIG, init)
    for name, value in reference.state_dict().items():
        assert np.array_equal(result.backbone.state_dict()[name], value)
    assert result.log_lines == []


def test_same_seed_gives_identical_logs_and_state():
    patches = make_patches()
    a = pretrain(patches, CONFIG, SPEC, epochs=2, batch_n=4, tau=0.5, seed=11)
    b = pretrain(patches, CONFIG, SPEC, epochs=2, batch_n=4, tau=0.5, seed=11)
    assert a.log_lines == b.log_lines
    for name, value in a.state_dict().items():
        assert np.array_equal(b.state_dict()[name], value), name


def test_different_seed_changes_training():
    patches = make_patches()
    a = pretrain(patches, CONFIG, SPEC, epochs=1, batch_n=4, tau=0.5, seed=1)
    b = pretrain(patches, CONFIG, SPEC, epochs=1, batch_n=4, tau=0.5, seed=2)
    assert a.log_lines != b.log_lines


def test_log_line_shape():
    patches = make_patches()
    result = pretrain(patches, CONFIG, SPEC, epochs=2, batch_n=4, tau=0.5, seed=5,
                      base_lr=1e-3, schedule=((3, 0.1),))
    assert len(result.log_lines) == 2
    for epoch, line in enumerate(result.log_lines):
        cells = line.split("\t")
        assert len(cells) == 5
        assert int(cells[0]) == epoch
        float(cells[1]), float(cells[2]), float(cells[3]), float(cells[4])
    # lr multiplier kicks in at optimizer step 3 (second epoch of 3-step epochs)
    assert result.log_lines[0].endswith("1.000000e-03")
    assert result.log_lines[1].endswith("1.000000e-04")


def test_checkpoints_written_every_k_epochs(tmp_path):
    patches = make_patches()
    pretrain(
        patches, CONFIG, SPEC, epochs=4, batch_n=6, tau=0.5, seed=7,
        checkpoint_every=2, checkpoint_dir=tmp_path,
    )
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["ckpt_epoch0002.hkw", "ckpt_epoch0004.hkw"]


def test_batch_larger_than_dataset_rejected():
    patches = make_patches(count=3)
    with pytest.raises(ValueError, match="batch size"):
        pretrain(patches, CONFIG, SPEC, epochs=1, batch_n=4, tau=0.5)


def test_patch_shape_mismatch_rejected():
    patches = make_patches(size=16)
    with pytest.raises(ValueError, match="patch 0"):
        pretrain(patches, CONFIG, SPEC, epochs=1, batch_n=2, tau=0.5)


def test_embed_patches_aligned_and_deterministic():
    patches = make_patches()
    result = pretrain(patches, CONFIG, SPEC, epochs=1, batch_n=4, tau=0.5, seed=9)
    emb = embed_patches(result.backbone, patches, batch=5)
    assert emb.shape == (len(patches), CONFIG.embedding_dim)
    again = embed_patches(result.backbone, patches, batch=3)
    assert np.array_equal(emb, again)
