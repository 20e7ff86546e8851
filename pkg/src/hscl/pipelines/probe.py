"""Linear classification probe on frozen embeddings.

The encoder never updates here: embeddings are precomputed, L2-normalized
for conditioning, and a single linear layer is fit with Adam under a fixed
step budget. Split and init randomness derive from the run seed alone, so
a probe run is exactly repeatable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from hscl.engine.layers import Linear
from hscl.engine.optim import OptimizerState, adam_step
from hscl.metrics.quality import ConfusionMatrix, classification_metrics


@dataclass(frozen=True)
class ProbeReport:
    confusion: ConfusionMatrix
    overall_accuracy: float
    average_accuracy: float
    kappa: float
    missing_train_classes: tuple


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    norms = np.linalg.norm(x.astype(np.float64), axis=1, keepdims=True)
    return (x / np.maximum(norms, 1e-12)).astype(np.float32)


def train_linear_probe(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    steps: int = 300,
    lr: float = 1e-2,
    seed: int = 0,
) -> Linear:
    """Fit one linear layer with full-batch Adam; returns the fitted layer."""
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"features must be (N, D) with N >= 1, got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match {x.shape[0]} rows")
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    if np.any(y < 0) or np.any(y >= num_classes):
        raise ValueError(f"labels outside [0, {num_classes})")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")

    rng = np.random.default_rng([int(seed), 3])
    fc = Linear(x.shape[1], num_classes, rng)
    named = [("probe.weight", fc.weight), ("probe.bias", fc.bias)]
    state = OptimizerState(base_lr=lr)
    onehot = np.eye(num_classes, dtype=np.float64)[y]
    for _ in range(steps):
        logits = fc.forward(x)
        probs = _softmax_rows(logits)
        dlogits = ((probs - onehot) / x.shape[0]).astype(np.float32)
        fc.backward(dlogits)
        adam_step(named, state)
        for _, p in named:
            p.zero_grad()
    return fc


def predict(fc: Linear, x: np.ndarray) -> np.ndarray:
    """Class indices for each row; argmax ties go to the lower index."""
    logits = fc.forward(np.asarray(x, dtype=np.float32))
    return np.argmax(logits, axis=1)


def linear_probe(
    embeddings: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    train_fraction: float = 0.5,
    steps: int = 300,
    lr: float = 1e-2,
    seed: int = 0,
) -> ProbeReport:
    """Split, fit, and score; classes missing from the train split are
    flagged in the report and warned about."""
    z = _normalize_rows(embeddings)
    y = np.asarray(labels, dtype=np.int64)
    n = z.shape[0]
    if y.shape != (n,):
        raise ValueError(f"labels shape {y.shape} does not match {n} embeddings")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * n))
    if not 1 <= n_train <= n - 1:
        raise ValueError(
            f"train_fraction {train_fraction} leaves an empty split for {n} patches"
        )
    perm = np.random.default_rng([int(seed), 4]).permutation(n)
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    missing = sorted(set(range(num_classes)) - set(y[train_idx].tolist()))
    if missing:
        warnings.warn(
            f"class index(es) {missing} absent from the training split", stacklevel=2
        )

    fc = train_linear_probe(z[train_idx], y[train_idx], num_classes, steps, lr, seed)
    pred = predict(fc, z[test_idx])
    cm = ConfusionMatrix.from_labels(y[test_idx], pred, num_classes)
    oa, aa, kappa = classification_metrics(cm)
    return ProbeReport(
        confusion=cm,
        overall_accuracy=oa,
        average_accuracy=aa,
        kappa=kappa,
        missing_train_classes=tuple(missing),
    )
