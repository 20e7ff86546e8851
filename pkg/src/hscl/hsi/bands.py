"""Band selection: full, manual subset, or PCA over pixel spectra.

The PCA eigendecomposition is a cyclic Jacobi sweep on the band covariance
matrix; band counts stay small (<= 256) so this is cheap and dependency-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from hscl.hsi.patches import Patch

ORTHONORMALITY_TOL = 1e-6
JACOBI_OFFDIAG_TOL = 1e-10
_JACOBI_MAX_SWEEPS = 100


def jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted by non-increasing eigenvalue;
    eigenvector k is ``vecs[:, k]``. Converges when every off-diagonal
    magnitude drops below ``JACOBI_OFFDIAG_TOL``.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0):
        raise ValueError("matrix must be symmetric")
    n = a.shape[0]
    v = np.eye(n, dtype=np.float64)

    def _offdiag_max() -> float:
        return float(np.abs(a - np.diag(np.diag(a))).max()) if n > 1 else 0.0

    for _ in range(_JACOBI_MAX_SWEEPS):
        if _offdiag_max() < JACOBI_OFFDIAG_TOL:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < JACOBI_OFFDIAG_TOL:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    if _offdiag_max() >= JACOBI_OFFDIAG_TOL:
        raise RuntimeError("Jacobi eigensolver failed to converge")
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    vecs = v[:, order]
    # deterministic sign: largest-magnitude entry of each column made positive
    for k in range(n):
        col = vecs[:, k]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0:
            vecs[:, k] = -col
    return eigvals, vecs


@dataclass
class BandSelector:
    """Channel selection mode: full passthrough, manual subset, or PCA projection."""

    mode: Literal["full", "manual", "pca"]
    input_bands: int = 0
    indices: tuple[int, ...] | None = None
    n_components: int = 0
    mean: np.ndarray | None = None
    basis: np.ndarray | None = None
    explained_variance: np.ndarray | None = None
    degenerate: bool = False

    @staticmethod
    def full() -> "BandSelector":
        return BandSelector(mode="full")

    @staticmethod
    def manual(indices: Sequence[int], input_bands: int) -> "BandSelector":
        sel = BandSelector(
            mode="manual", input_bands=input_bands, indices=tuple(int(i) for i in indices)
        )
        sel.validate()
        return sel

    @property
    def output_bands(self) -> int | None:
        if self.mode == "manual":
            return len(self.indices or ())
        if self.mode == "pca":
            return self.n_components
        return None  # full: same as input

    def validate(self) -> None:
        if self.mode == "full":
            return
        if self.mode == "manual":
            idx = self.indices
            if not idx:
                raise ValueError("manual selector needs at least one index")
            if any(b - a <= 0 for a, b in zip(idx, idx[1:])):
                raise ValueError(f"manual indices must be strictly increasing: {idx}")
            if idx[0] < 0 or idx[-1] >= self.input_bands:
                raise ValueError(
                    f"manual indices must lie in [0, {self.input_bands}), got {idx}"
                )
            return
        if self.mode == "pca":
            if self.basis is None or self.mean is None:
                raise ValueError("pca selector missing fitted mean/basis")
            c, k = self.basis.shape
            if c != self.input_bands or k != self.n_components:
                raise ValueError(
                    f"pca basis shape {self.basis.shape} inconsistent with "
                    f"C={self.input_bands}, k={self.n_components}"
                )
            if self.n_components > self.input_bands:
                raise ValueError("n_components exceeds band count")
            gram = self.basis.T @ self.basis
            if np.abs(gram - np.eye(k)).max() > ORTHONORMALITY_TOL:
                raise ValueError("pca basis columns are not orthonormal")
            return
        raise ValueError(f"unknown selector mode {self.mode!r}")


def fit_pca(patches: Sequence[Patch], n_components: int) -> BandSelector:
    """Fit a PCA band selector treating every pixel as a C-dimensional sample.

    Basis columns are unit-norm, mutually orthogonal, ordered by non-increasing
    explained variance. All-constant input is flagged ``degenerate`` and gets
    an identity-like basis.
    """
    if not patches:
        raise ValueError("fit_pca needs at least one patch")
    bands = patches[0].bands
    if any(p.bands != bands for p in patches):
        raise ValueError("patches disagree on band count")
    if n_components < 1 or n_components > bands:
        raise ValueError(f"n_components must be in [1, {bands}], got {n_components}")
    x = np.concatenate(
        [p.data.reshape(-1, bands).astype(np.float64) for p in patches], axis=0
    )
    if x.shape[0] < 2:
        raise ValueError("fit_pca needs at least 2 spectra")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / (x.shape[0] - 1)
    degenerate = bool(np.abs(cov).max() == 0.0)
    if degenerate:
        eigvals = np.zeros(bands)
        vecs = np.eye(bands)
    else:
        eigvals, vecs = jacobi_eigh(cov)
    return BandSelector(
        mode="pca",
        input_bands=bands,
        n_components=n_components,
        mean=mean,
        basis=vecs[:, :n_components].copy(),
        explained_variance=np.maximum(eigvals[:n_components], 0.0),
        degenerate=degenerate,
    )


def select_bands(patch: Patch, selector: BandSelector) -> Patch:
    """Apply a band selector to one patch. Full mode is the identity."""
    selector.validate()
    if selector.mode == "full":
        return patch
    if patch.bands != selector.input_bands:
        raise ValueError(
            f"selector expects {selector.input_bands} bands, patch has {patch.bands}"
        )
    if selector.mode == "manual":
        data = patch.data[:, :, list(selector.indices)]
    else:  # pca: per-pixel projection onto the basis
        s = patch.size
        flat = patch.data.reshape(-1, patch.bands).astype(np.float64)
        proj = (flat - selector.mean) @ selector.basis
        data = proj.reshape(s, s, selector.n_components).astype(np.float32)
    return Patch(
        data=data,
        source_row=patch.source_row,
        source_col=patch.source_col,
        source_cube_id=patch.source_cube_id,
    )
