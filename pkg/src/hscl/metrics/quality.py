"""Cube fidelity metrics, retrieval accuracy, and confusion-matrix scores.

All reductions run in float64.  Inputs may be HyperCube objects or plain
(H, W, C) arrays; shapes must match exactly.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np


def _as_samples(x):
    data = getattr(x, "data", x)
    return np.asarray(data, dtype=np.float64)


def _paired(ref, est):
    r = _as_samples(ref)
    e = _as_samples(est)
    if r.shape != e.shape:
        raise ValueError(f"shape mismatch: reference {r.shape} vs estimate {e.shape}")
    return r, e


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    params: str = ""
    inputs: str = ""

    def to_tsv(self):
        if math.isinf(self.value):
            rendered = "inf"
        else:
            rendered = f"{self.value:.6f}"
        return f"{self.name}\t{rendered}\t{self.params}\t{self.inputs}"


def rmse(ref, est):
    r, e = _paired(ref, est)
    return float(np.sqrt(np.mean((r - e) ** 2)))


def psnr(ref, est, peak=1.0):
    """10*log10(peak^2 / MSE); identical inputs give math.inf."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    r, e = _paired(ref, est)
    mse = float(np.mean((r - e) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def sam(ref, est):
    """Mean per-pixel spectral angle in degrees.

    Zero-norm reference spectra are an input error; zero-norm estimate
    spectra contribute the worst-case 90 degrees.
    """
    r, e = _paired(ref, est)
    if r.ndim != 3:
        raise ValueError(f"expected (H, W, C) cubes, got shape {r.shape}")
    rf = r.reshape(-1, r.shape[2])
    ef = e.reshape(-1, e.shape[2])
    rn = np.linalg.norm(rf, axis=1)
    en = np.linalg.norm(ef, axis=1)
    if np.any(rn == 0):
        raise ValueError("reference contains zero-norm spectra")
    angles = np.full(rf.shape[0], 90.0)
    ok = en > 0
    cosv = np.clip((rf[ok] * ef[ok]).sum(axis=1) / (rn[ok] * en[ok]), -1.0, 1.0)
    angles[ok] = np.degrees(np.arccos(cosv))
    return float(angles.mean())


def cc(ref, est):
    """Mean per-band Pearson correlation over pixels.

    A constant estimate band cannot correlate; it contributes 0 and is
    flagged with a warning.  A constant reference band is an error.
    """
    r, e = _paired(ref, est)
    if r.ndim != 3:
        raise ValueError(f"expected (H, W, C) cubes, got shape {r.shape}")
    bands = r.shape[2]
    rf = r.reshape(-1, bands)
    ef = e.reshape(-1, bands)
    if np.any(rf.max(axis=0) == rf.min(axis=0)):
        raise ValueError("reference has a constant band")
    rc = rf - rf.mean(axis=0)
    ec = ef - ef.mean(axis=0)
    rs = np.sqrt((rc**2).sum(axis=0))
    es = np.sqrt((ec**2).sum(axis=0))
    out = np.zeros(bands)
    flat = ef.max(axis=0) > ef.min(axis=0)
    out[flat] = (rc[:, flat] * ec[:, flat]).sum(axis=0) / (rs[flat] * es[flat])
    if not np.all(flat):
        warnings.warn(
            f"{int((~flat).sum())} constant estimate band(s) contribute 0 correlation",
            stacklevel=2,
        )
    return float(out.mean())


def ergas(ref, est, ratio=0.25):
    """100 * ratio * sqrt(mean_b (RMSE_b / mean_b)^2)."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"resolution ratio must sit in (0, 1], got {ratio}")
    r, e = _paired(ref, est)
    if r.ndim != 3:
        raise ValueError(f"expected (H, W, C) cubes, got shape {r.shape}")
    bands = r.shape[2]
    rf = r.reshape(-1, bands)
    ef = e.reshape(-1, bands)
    mu = rf.mean(axis=0)
    if np.any(mu == 0):
        raise ValueError("reference has a zero-mean band")
    band_rmse = np.sqrt(((rf - ef) ** 2).mean(axis=0))
    return float(100.0 * ratio * np.sqrt(np.mean((band_rmse / mu) ** 2)))


def topk_retrieval(embeddings, labels, k):
    """Fraction of queries whose k nearest (cosine) neighbours share the label.

    Neighbour ranking is by descending similarity with ties resolved to
    the lower index, so results are deterministic.
    """
    z = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError(f"need at least 2 embeddings, got shape {z.shape}")
    n = z.shape[0]
    if y.shape != (n,):
        raise ValueError(f"labels shape {y.shape} does not match {n} embeddings")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} outside [1, {n - 1}]")
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm embedding")
    zn = z / norms[:, None]
    sims = zn @ zn.T
    np.fill_diagonal(sims, -np.inf)
    hits = 0
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, -sims[i]))
        if np.any(y[order[:k]] == y[i]):
            hits += 1
    return hits / n


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are reference classes, columns predictions."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion matrix entries must be >= 0")
        if counts.sum() == 0:
            raise ValueError("confusion matrix is empty")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_labels(cls, ref, pred, num_classes):
        ref = np.asarray(ref, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if ref.shape != pred.shape:
            raise ValueError(f"label shapes differ: {ref.shape} vs {pred.shape}")
        if np.any(ref < 0) or np.any(ref >= num_classes):
            raise ValueError("reference labels outside [0, num_classes)")
        if np.any(pred < 0) or np.any(pred >= num_classes):
            raise ValueError("predicted labels outside [0, num_classes)")
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(counts, (ref, pred), 1)
        return cls(counts)


def classification_metrics(cm):
    """(overall accuracy, average per-class recall, chance-corrected kappa).

    Classes with zero reference support are excluded from the average
    recall and flagged with a warning.
    """
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    oa = float(np.trace(counts) / total)
    row_tot = counts.sum(axis=1)
    col_tot = counts.sum(axis=0)
    support = row_tot > 0
    if not np.all(support):
        warnings.warn(
            f"{int((~support).sum())} class(es) with zero support excluded from AA",
            stacklevel=2,
        )
    recalls = np.diag(counts)[support] / row_tot[support]
    aa = float(recalls.mean())
    pe = float((row_tot * col_tot).sum() / (total * total))
    if pe >= 1.0:
        kappa = 1.0 if oa == 1.0 else 0.0
    else:
        kappa = float((oa - pe) / (1.0 - pe))
    return oa, aa, kappa
