"""Augmentation pipeline, NT-Xent loss, hard-negative mining, pretraining loop."""

from hscl.contrastive.augment import AugmentOp, AugmentationSpec, augment, default_augmentations
from hscl.contrastive.ntxent import (
    ContrastiveBatch,
    cosine_sim,
    hard_negative,
    nt_xent_loss,
)
from hscl.contrastive.pretrain import PretrainResult, embed_patches, pretrain

__all__ = [
    "AugmentOp",
    "AugmentationSpec",
    "ContrastiveBatch",
    "PretrainResult",
    "augment",
    "cosine_sim",
    "default_augmentations",
    "embed_patches",
    "hard_negative",
    "nt_xent_loss",
    "pretrain",
]
