"""Feature-space distance under a frozen patch encoder.

The loss sums, over the configured stage set, the mean squared
difference between the encoder's stage outputs for prediction and
target.  The encoder is treated as fixed: its parameter gradients are
discarded, but the loss stays differentiable in the prediction.
"""

import numpy as np


def _to_activation(x):
    data = getattr(x, "data", x)
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise ValueError(f"expected an (S, S, C) patch, got shape {arr.shape}")
    return arr.transpose(2, 0, 1)[None]


def hspl(pred, target, backbone, layers=None, with_grad=False):
    """Scalar stage-feature MSE; optionally also d(loss)/d(pred).

    layers: 0-based stage indices to include (default: every stage).
    """
    xp = _to_activation(pred)
    xt = _to_activation(target)
    if xp.shape != xt.shape:
        raise ValueError(f"shape mismatch: prediction {xp.shape} vs target {xt.shape}")
    num_stages = len(backbone.stages)
    if layers is None:
        layers = tuple(range(num_stages))
    layers = tuple(int(i) for i in layers)
    if not layers:
        raise ValueError("layer set is empty")
    for i in layers:
        if not 0 <= i < num_stages:
            raise ValueError(f"stage index {i} outside [0, {num_stages})")

    # target pass first: its caches are overwritten by the prediction pass
    outs_t = [o.copy() for o in backbone.forward_stages(xt)]
    outs_p = backbone.forward_stages(xp)

    loss = 0.0
    grads = []
    for i in range(num_stages):
        diff = outs_p[i].astype(np.float64) - outs_t[i].astype(np.float64)
        if i in layers:
            loss += float((diff**2).mean())
            grads.append((2.0 * diff / diff.size).astype(xp.dtype))
        else:
            grads.append(np.zeros_like(outs_p[i]))
    if not with_grad:
        backbone.zero_grad()
        # drop the pending caches so a later backward cannot reuse them
        for stage in backbone.stages:
            stage._cache = None
        return loss

    dx = backbone.backward_stages(grads)
    backbone.zero_grad()
    return loss, dx[0].transpose(1, 2, 0)
