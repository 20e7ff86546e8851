"""Self-supervised pretraining over patch archives.

Determinism contract: every random draw derives from the run seed via
fixed spawn keys — [seed, 0] for parameter init, [seed, 1, epoch] for
the epoch's sampling order, [seed, 2, epoch, step, view, patch] for each
view's augmentation stream.  Identical (patches, config, spec, seed)
therefore reproduce identical parameters, logs, and checkpoints byte
for byte.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hscl.contrastive.augment import augment
from hscl.contrastive.ntxent import nt_xent_loss
from hscl.engine import ops
from hscl.engine.backbone import Backbone, ProjectionHead
from hscl.engine.checkpoint import save_checkpoint
from hscl.engine.optim import OptimizerState, adam_step, effective_lr

LOG_HEADER = "epoch\tloss\tpos_sim\thard_neg_sim\tlr"


@dataclass
class PretrainResult:
    backbone: "Backbone"
    head: "ProjectionHead"
    log_lines: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)

    def state_dict(self):
        out = {}
        for name, value in self.backbone.state_dict().items():
            out["backbone." + name] = value
        for name, value in self.head.state_dict().items():
            out["head." + name] = value
        return out


def _check_patches(patches, config):
    if not patches:
        raise ValueError("patch list is empty")
    s, c = config.patch_size, config.input_bands
    for i, p in enumerate(patches):
        if p.data.shape != (s, s, c):
            raise ValueError(
                f"patch {i} has shape {p.data.shape}, expected ({s}, {s}, {c})"
            )


def views_to_array(views):
    # (S, S, C) patches to a batched (N, C, S, S) activation
    return np.stack([v.data.transpose(2, 0, 1) for v in views]).astype(np.float32)


def _batch_stats(z):
    n2 = z.shape[0]
    z64 = z.astype(np.float64)
    sim = z64 @ z64.T
    pos = np.arange(n2) ^ 1
    pos_sims = sim[np.arange(n2), pos]
    masked = sim.copy()
    np.fill_diagonal(masked, -np.inf)
    masked[np.arange(n2), pos] = -np.inf
    hard_sims = masked.max(axis=1)
    return float(pos_sims.mean()), float(hard_sims.mean())


def pretrain(
    patches,
    config,
    spec,
    epochs,
    batch_n,
    tau,
    base_lr=1e-4,
    schedule=(),
    seed=0,
    include_self=False,
    checkpoint_every=0,
    checkpoint_dir=None,
    on_epoch=None,
):
    """Returns a PretrainResult; see the module docstring for rng layout.

    ``on_epoch``, when given, is called with each finished epoch's log line.
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if batch_n < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_n}")
    if len(patches) < batch_n:
        raise ValueError(f"batch size {batch_n} exceeds patch count {len(patches)}")
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    _check_patches(patches, config)

    init = np.random.default_rng([int(seed), 0])
    backbone = Backbone(config, init)
    head = ProjectionHead(config, init)
    named = [("backbone." + n, p) for n, p in backbone.named_params()]
    named += [("head." + n, p) for n, p in head.named_params()]
    state = OptimizerState(base_lr=base_lr, schedule=tuple(schedule))

    result = PretrainResult(backbone=backbone, head=head)
    steps_per_epoch = len(patches) // batch_n

    for epoch in range(epochs):
        sample_rng = np.random.default_rng([int(seed), 1, epoch])
        order = sample_rng.permutation(len(patches))
        losses, pos_means, hard_means = [], [], []
        lr_used = effective_lr(state)
        for step in range(steps_per_epoch):
            chosen = order[step * batch_n : (step + 1) * batch_n]
            views = []
            for j in chosen:
                for view in (0, 1):
                    view_rng = np.random.default_rng([int(seed), 2, epoch, step, view, int(j)])
                    views.append(augment(patches[j], spec, view_rng))
            x = views_to_array(views)

            feats = backbone.forward(x)
            proj = head.forward(feats)
            z, norm_cache = ops.l2_normalize_forward(proj)
            loss, dz = nt_xent_loss(z, tau, include_self=include_self)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss {loss} at epoch {epoch} step {step}")

            pos_mean, hard_mean = _batch_stats(z)
            losses.append(loss)
            pos_means.append(pos_mean)
            hard_means.append(hard_mean)

            dproj = ops.l2_normalize_backward(dz, norm_cache)
            backbone.backward(head.backward(dproj))
            lr_used = effective_lr(state)
            adam_step(named, state)
            for _, p in named:
                p.zero_grad()

        mean_loss = float(np.mean(losses)) if losses else float("nan")
        result.epoch_losses.append(mean_loss)
        result.log_lines.append(
            f"{epoch}\t{mean_loss:.6f}\t{np.mean(pos_means):.6f}"
            f"\t{np.mean(hard_means):.6f}\t{lr_used:.6e}"
        )
        if on_epoch is not None:
            on_epoch(result.log_lines[-1])
        if checkpoint_every and checkpoint_dir is not None and (epoch + 1) % checkpoint_every == 0:
            save_checkpoint(
                Path(checkpoint_dir) / f"ckpt_epoch{epoch + 1:04d}.hkw", result.state_dict()
            )

    return result


def embed_patches(backbone, patches, batch=64):
    """Frozen-backbone embeddings for a patch list, row-aligned with it."""
    _check_patches(patches, backbone.config)
    chunks = []
    for start in range(0, len(patches), batch):
        x = views_to_array(patches[start : start + batch])
        chunks.append(backbone.forward(x))
    return np.concatenate(chunks, axis=0)
