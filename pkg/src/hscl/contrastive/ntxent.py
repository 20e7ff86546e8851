"""Temperature-scaled contrastive loss over paired views.

Embeddings arrive as 2N unit rows where rows 2i and 2i+1 are the two
views of sample i.  Every row serves as an anchor once; its positive is
its partner and, by default, the softmax denominator runs over the other
2N-1 rows (the anchor itself is excluded).  The literal form that keeps
the self term in the denominator is available behind include_self for
comparison; it can never reach zero loss.

Gradients come from the softmax cross-entropy closed form: with
G_ij = (P_ij - 1[j = partner(i)]) / 2N on the off-diagonal similarity
matrix, dL/dZ = (G + G^T) Z / tau.
"""

from dataclasses import dataclass

import numpy as np

NORM_TOL_STRICT = 1e-5
NORM_TOL_LOOSE = 1e-3


@dataclass(frozen=True)
class ContrastiveBatch:
    """2N projected, L2-normalized view embeddings, pairs interleaved."""

    embeddings: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.embeddings)
        if z.ndim != 2:
            raise ValueError(f"embeddings must be 2-D, got shape {z.shape}")
        if z.shape[0] % 2 or z.shape[0] < 2:
            raise ValueError(f"need an even number of views >= 2, got {z.shape[0]}")
        norms = np.sqrt((z.astype(np.float64) ** 2).sum(axis=1))
        if np.abs(norms - 1.0).max() > NORM_TOL_STRICT:
            raise ValueError(
                f"views must be unit-norm within {NORM_TOL_STRICT}, "
                f"worst deviation {np.abs(norms - 1.0).max():.2e}"
            )
        object.__setattr__(self, "embeddings", z)

    @property
    def num_pairs(self):
        return self.embeddings.shape[0] // 2


def cosine_sim(z_i, z_j):
    return float(np.dot(np.asarray(z_i, dtype=np.float64), np.asarray(z_j, dtype=np.float64)))


def partner_indices(num_views):
    return np.arange(num_views) ^ 1


def nt_xent_loss(z, tau, include_self=False):
    """Returns (scalar loss, gradient w.r.t. z).

    z: (2N, D) approximately unit rows; rows 2i and 2i+1 are a pair.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = np.asarray(z)
    if z.ndim != 2 or z.shape[0] % 2 or z.shape[0] < 2:
        raise ValueError(f"expected (2N, D) embeddings with N >= 1, got shape {z.shape}")
    norms = np.sqrt((z.astype(np.float64) ** 2).sum(axis=1))
    if np.abs(norms - 1.0).max() > NORM_TOL_LOOSE:
        raise ValueError(
            f"embeddings drifted from unit norm by {np.abs(norms - 1.0).max():.2e}"
        )
    n2 = z.shape[0]
    pos = partner_indices(n2)

    z64 = z.astype(np.float64)
    sim = (z64 @ z64.T) / tau
    if include_self:
        masked = sim
    else:
        masked = sim.copy()
        np.fill_diagonal(masked, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)
    shifted = np.exp(masked - row_max)
    denom = shifted.sum(axis=1)
    log_prob_pos = masked[np.arange(n2), pos] - row_max[:, 0] - np.log(denom)
    loss = float(-log_prob_pos.mean())

    p = shifted / denom[:, None]
    g = p.copy()
    g[np.arange(n2), pos] -= 1.0
    if not include_self:
        np.fill_diagonal(g, 0.0)
    g /= n2
    dz = ((g + g.T) @ z64) / tau
    return loss, dz.astype(z.dtype)


def hard_negative(anchor, positive, embeddings):
    """Index of the non-positive view most similar to the anchor.

    Ties resolve to the lowest index.
    """
    z = np.asarray(embeddings)
    n = z.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 views to pick a hard negative, got {n}")
    if anchor == positive or not (0 <= anchor < n and 0 <= positive < n):
        raise ValueError(f"bad anchor/positive pair ({anchor}, {positive}) for {n} views")
    sims = z.astype(np.float64) @ z[anchor].astype(np.float64)
    sims[anchor] = -np.inf
    sims[positive] = -np.inf
    return int(np.argmax(sims))
