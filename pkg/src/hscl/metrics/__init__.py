"""Reconstruction, classification, and retrieval metrics plus the feature-space loss."""

from hscl.metrics.hspl import hspl
from hscl.metrics.quality import (
    ConfusionMatrix,
    MetricReport,
    cc,
    classification_metrics,
    ergas,
    psnr,
    rmse,
    sam,
    topk_retrieval,
)

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "cc",
    "classification_metrics",
    "ergas",
    "hspl",
    "psnr",
    "rmse",
    "sam",
    "topk_retrieval",
]
