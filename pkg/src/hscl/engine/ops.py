"""Dense forward/backward kernels for the patch encoder.

Spatial ops take batched (N, C, H, W) arrays.  Each forward returns
(output, cache); the matching backward consumes the upstream gradient
plus that cache and returns gradients for the inputs in call order.
There is no tape: composite modules chain these pairs explicitly.

Output dtype follows the input (float32 during training, float64 inside
gradient checks).  Reductions over batch or space accumulate in float64
before casting back.
"""

import numpy as np


def stable_sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu_forward(x):
    y = np.maximum(x, 0)
    return y, (x > 0)


def relu_backward(dy, cache):
    return dy * cache


def linear_forward(x, w, b):
    # x: (N, D_in), w: (D_out, D_in), b: (D_out,)
    if x.ndim != 2:
        raise ValueError(f"linear input must be 2-D, got shape {x.shape}")
    if w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"weight shape {w.shape} incompatible with input {x.shape}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"bias shape {b.shape} incompatible with weight {w.shape}")
    y = x @ w.T + b
    return y, (x, w)


def linear_backward(dy, cache):
    x, w = cache
    dx = dy @ w
    dw = (dy.astype(np.float64).T @ x.astype(np.float64)).astype(w.dtype)
    db = dy.sum(axis=0, dtype=np.float64).astype(w.dtype)
    return dx, dw, db


def _conv2d_geometry(h, w, k, stride, pad):
    num_h = h + 2 * pad - k
    num_w = w + 2 * pad - k
    if num_h < 0 or num_w < 0:
        raise ValueError(f"kernel {k} exceeds padded input {h + 2 * pad}x{w + 2 * pad}")
    if num_h % stride or num_w % stride:
        raise ValueError(
            f"non-integral output extent for input {h}x{w}, k={k}, stride={stride}, pad={pad}"
        )
    return num_h // stride + 1, num_w // stride + 1


def _im2col(x, k, stride, pad, ho, wo):
    n, c, _, _ = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, k, k, ho, wo), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = x[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols


def _col2im(dcols, shape, k, stride, pad, ho, wo):
    n, c, h, w = shape
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[
                :, :, i, j
            ]
    if pad:
        return dxp[:, :, pad : pad + h, pad : pad + w]
    return dxp


def conv2d_forward(x, w, b=None, stride=1, pad=0, groups=1):
    """Grouped 2-D cross-correlation.

    x: (N, C_in, H, W); w: (C_out, C_in/groups, k, k); optional b: (C_out,).
    Output extents must divide exactly: (H + 2*pad - k) % stride == 0.
    """
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be 4-D, got shape {x.shape}")
    n, cin, h, wd = x.shape
    cout, cpg, kh, kw = w.shape
    if kh != kw:
        raise ValueError(f"kernel must be square, got {kh}x{kw}")
    if kh % 2 == 0:
        raise ValueError(f"kernel extent must be odd, got {kh}")
    k = kh
    if groups < 1 or cin % groups or cout % groups:
        raise ValueError(f"groups={groups} must divide C_in={cin} and C_out={cout}")
    if cpg != cin // groups:
        raise ValueError(f"kernel channel extent {cpg} != C_in/groups = {cin // groups}")
    ho, wo = _conv2d_geometry(h, wd, k, stride, pad)
    cols = _im2col(x, k, stride, pad, ho, wo)
    colsg = cols.reshape(n, groups, cpg * k * k, ho * wo)
    wg = w.reshape(groups, cout // groups, cpg * k * k)
    y = np.matmul(wg[None], colsg).reshape(n, cout, ho, wo)
    if b is not None:
        y = y + b[None, :, None, None]
    cache = (x, w, b is not None, stride, pad, groups, ho, wo)
    return y, cache


def conv2d_backward(dy, cache):
    x, w, has_bias, stride, pad, groups, ho, wo = cache
    n, cin, _, _ = x.shape
    cout, cpg, k, _ = w.shape
    cols = _im2col(x, k, stride, pad, ho, wo)
    colsg = cols.reshape(n, groups, cpg * k * k, ho * wo)
    wg = w.reshape(groups, cout // groups, cpg * k * k)
    dyg = dy.reshape(n, groups, cout // groups, ho * wo)
    dw = (
        np.matmul(dyg, colsg.transpose(0, 1, 3, 2))
        .sum(axis=0, dtype=np.float64)
        .astype(w.dtype)
        .reshape(w.shape)
    )
    dcolsg = np.matmul(wg.transpose(0, 2, 1)[None], dyg)
    dcols = dcolsg.reshape(n, cin, k, k, ho, wo)
    dx = _col2im(dcols, x.shape, k, stride, pad, ho, wo)
    db = dy.sum(axis=(0, 2, 3), dtype=np.float64).astype(w.dtype) if has_bias else None
    return dx, dw, db


def _triple(v):
    if isinstance(v, int):
        return (v, v, v)
    t = tuple(v)
    if len(t) != 3:
        raise ValueError(f"expected int or length-3 tuple, got {v!r}")
    return t


def conv3d_forward(x, w, b=None, stride=1, pad=0):
    """3-D cross-correlation treating the channel axis as a third spatial axis.

    x: (N, C_in, D, H, W); w: (F, C_in, kd, kh, kw); optional b: (F,).
    """
    if x.ndim != 5:
        raise ValueError(f"conv3d input must be 5-D, got shape {x.shape}")
    n, cin, d, h, wd = x.shape
    f, cw, kd, kh, kw = w.shape
    if cw != cin:
        raise ValueError(f"kernel channels {cw} != input channels {cin}")
    for ke in (kd, kh, kw):
        if ke % 2 == 0:
            raise ValueError(f"kernel extents must be odd, got {(kd, kh, kw)}")
    sd, sh, sw = _triple(stride)
    pd, ph, pw = _triple(pad)
    dims = []
    for ext, ke, st, pa in ((d, kd, sd, pd), (h, kh, sh, ph), (wd, kw, sw, pw)):
        num = ext + 2 * pa - ke
        if num < 0 or num % st:
            raise ValueError(
                f"non-integral output extent for input {(d, h, wd)}, "
                f"kernel {(kd, kh, kw)}, stride {(sd, sh, sw)}, pad {(pd, ph, pw)}"
            )
        dims.append(num // st + 1)
    do, ho, wo = dims
    xp = np.pad(x, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw))) if (pd or ph or pw) else x
    cols = np.empty((n, cin, kd, kh, kw, do, ho, wo), dtype=x.dtype)
    for i in range(kd):
        for j in range(kh):
            for l in range(kw):
                cols[:, :, i, j, l] = xp[
                    :,
                    :,
                    i : i + sd * do : sd,
                    j : j + sh * ho : sh,
                    l : l + sw * wo : sw,
                ]
    colsm = cols.reshape(n, cin * kd * kh * kw, do * ho * wo)
    wm = w.reshape(f, cin * kd * kh * kw)
    y = np.matmul(wm[None], colsm).reshape(n, f, do, ho, wo)
    if b is not None:
        y = y + b[None, :, None, None, None]
    cache = (x, w, b is not None, (sd, sh, sw), (pd, ph, pw), (do, ho, wo))
    return y, cache


def conv3d_backward(dy, cache):
    x, w, has_bias, (sd, sh, sw), (pd, ph, pw), (do, ho, wo) = cache
    n, cin, d, h, wd = x.shape
    f, _, kd, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw))) if (pd or ph or pw) else x
    cols = np.empty((n, cin, kd, kh, kw, do, ho, wo), dtype=x.dtype)
    for i in range(kd):
        for j in range(kh):
            for l in range(kw):
                cols[:, :, i, j, l] = xp[
                    :,
                    :,
                    i : i + sd * do : sd,
                    j : j + sh * ho : sh,
                    l : l + sw * wo : sw,
                ]
    colsm = cols.reshape(n, cin * kd * kh * kw, do * ho * wo)
    wm = w.reshape(f, cin * kd * kh * kw)
    dym = dy.reshape(n, f, do * ho * wo)
    dw = (
        np.matmul(dym, colsm.transpose(0, 2, 1))
        .sum(axis=0, dtype=np.float64)
        .astype(w.dtype)
        .reshape(w.shape)
    )
    dcolsm = np.matmul(wm.T[None], dym)
    dcols = dcolsm.reshape(n, cin, kd, kh, kw, do, ho, wo)
    dxp = np.zeros_like(xp)
    for i in range(kd):
        for j in range(kh):
            for l in range(kw):
                dxp[
                    :,
                    :,
                    i : i + sd * do : sd,
                    j : j + sh * ho : sh,
                    l : l + sw * wo : sw,
                ] += dcols[:, :, i, j, l]
    dx = dxp[:, :, pd : pd + d, ph : ph + h, pw : pw + wd] if (pd or ph or pw) else dxp
    db = dy.sum(axis=(0, 2, 3, 4), dtype=np.float64).astype(w.dtype) if has_bias else None
    return dx, dw, db


def avgpool2_forward(x):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"2x2 average pool needs even extents, got {h}x{w}")
    y = 0.25 * (
        x[:, :, 0::2, 0::2] + x[:, :, 0::2, 1::2] + x[:, :, 1::2, 0::2] + x[:, :, 1::2, 1::2]
    )
    return y, x.shape


def avgpool2_backward(dy, cache):
    dx = np.empty(cache, dtype=dy.dtype)
    q = 0.25 * dy
    dx[:, :, 0::2, 0::2] = q
    dx[:, :, 0::2, 1::2] = q
    dx[:, :, 1::2, 0::2] = q
    dx[:, :, 1::2, 1::2] = q
    return dx


def global_avgpool_forward(x):
    n, c, h, w = x.shape
    y = x.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)
    return y, x.shape


def global_avgpool_backward(dy, cache):
    n, c, h, w = cache
    return np.broadcast_to(dy[:, :, None, None] / (h * w), cache).astype(dy.dtype, copy=True)


def se_gate_forward(x, beta, gamma):
    """Per-channel affine sigmoid gate.

    s_c = spatial mean of channel c, e_c = sigmoid(beta_c * s_c + gamma_c),
    y = e_c * x.  Preserves the sign and zero pattern of x per channel.
    """
    n, c, h, w = x.shape
    if beta.shape != (c,) or gamma.shape != (c,):
        raise ValueError(f"gate vectors must have shape ({c},)")
    s = x.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)
    e = stable_sigmoid(beta[None, :] * s + gamma[None, :])
    y = e[:, :, None, None] * x
    return y, (x, beta, s, e)


def se_gate_backward(dy, cache):
    x, beta, s, e = cache
    n, c, h, w = x.shape
    de = (dy.astype(np.float64) * x.astype(np.float64)).sum(axis=(2, 3)).astype(x.dtype)
    dpre = de * e * (1.0 - e)
    dbeta = (dpre.astype(np.float64) * s.astype(np.float64)).sum(axis=0).astype(beta.dtype)
    dgamma = dpre.sum(axis=0, dtype=np.float64).astype(beta.dtype)
    dx = e[:, :, None, None] * dy + (dpre * beta[None, :] / (h * w))[:, :, None, None]
    return dx, dbeta, dgamma


def l2_normalize_forward(v, eps=1e-12):
    # rows of v: (N, D)
    if v.ndim != 2:
        raise ValueError(f"expected 2-D input, got shape {v.shape}")
    nrm = np.sqrt((v.astype(np.float64) ** 2).sum(axis=1))
    if np.any(nrm < eps):
        raise ValueError("cannot normalize a zero-norm row")
    nrm = nrm.astype(v.dtype)
    z = v / nrm[:, None]
    return z, (z, nrm)


def l2_normalize_backward(dz, cache):
    z, nrm = cache
    inner = (dz.astype(np.float64) * z.astype(np.float64)).sum(axis=1).astype(z.dtype)
    return (dz - z * inner[:, None]) / nrm[:, None]
