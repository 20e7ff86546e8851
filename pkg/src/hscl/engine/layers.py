"""Stateful layers pairing each op with its parameters and backward cache.

A layer's forward records what backward needs; backward consumes the
record, accumulates parameter gradients, and returns the input gradient.
Calling backward twice without a fresh forward raises.
"""

import numpy as np

from hscl.engine import ops
from hscl.engine.params import Parameter, uniform_init


class Layer:
    def __init__(self):
        self._cache = None

    def named_params(self):
        return []

    def zero_grad(self):
        for _, p in self.named_params():
            p.zero_grad()

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise RuntimeError(f"{type(self).__name__}.backward called without a pending forward")
        cache, self._cache = self._cache, None
        return cache


class Identity(Layer):
    def forward(self, x):
        self._cache = ()
        return x

    def backward(self, dy):
        self._take_cache()
        return dy


class ReLU(Layer):
    def forward(self, x):
        y, self._cache = ops.relu_forward(x)
        return y

    def backward(self, dy):
        return ops.relu_backward(dy, self._take_cache())


class Linear(Layer):
    def __init__(self, in_features, out_features, rng):
        super().__init__()
        self.weight = Parameter(uniform_init(rng, (out_features, in_features), in_features))
        self.bias = Parameter(np.zeros(out_features, dtype=np.float32))

    def named_params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x):
        y, self._cache = ops.linear_forward(x, self.weight.data, self.bias.data)
        return y

    def backward(self, dy):
        dx, dw, db = ops.linear_backward(dy, self._take_cache())
        self.weight.add_grad(dw)
        self.bias.add_grad(db)
        return dx


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1, pad=0, groups=1):
        super().__init__()
        if in_channels % groups or out_channels % groups:
            raise ValueError(
                f"groups={groups} must divide in={in_channels} and out={out_channels}"
            )
        cpg = in_channels // groups
        fan_in = cpg * kernel_size * kernel_size
        self.stride = stride
        self.pad = pad
        self.groups = groups
        self.weight = Parameter(
            uniform_init(rng, (out_channels, cpg, kernel_size, kernel_size), fan_in)
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=np.float32))

    def named_params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x):
        y, self._cache = ops.conv2d_forward(
            x, self.weight.data, self.bias.data, self.stride, self.pad, self.groups
        )
        return y

    def backward(self, dy):
        dx, dw, db = ops.conv2d_backward(dy, self._take_cache())
        self.weight.add_grad(dw)
        self.bias.add_grad(db)
        return dx


class Conv3d(Layer):
    def __init__(self, in_channels, filters, kernel, rng, stride=1, pad=0):
        super().__init__()
        kd, kh, kw = kernel
        fan_in = in_channels * kd * kh * kw
        self.stride = stride
        self.pad = pad
        self.weight = Parameter(uniform_init(rng, (filters, in_channels, kd, kh, kw), fan_in))
        self.bias = Parameter(np.zeros(filters, dtype=np.float32))

    def named_params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x):
        y, self._cache = ops.conv3d_forward(
            x, self.weight.data, self.bias.data, self.stride, self.pad
        )
        return y

    def backward(self, dy):
        dx, dw, db = ops.conv3d_backward(dy, self._take_cache())
        self.weight.add_grad(dw)
        self.bias.add_grad(db)
        return dx


class AvgPool2(Layer):
    def forward(self, x):
        y, self._cache = ops.avgpool2_forward(x)
        return y

    def backward(self, dy):
        return ops.avgpool2_backward(dy, self._take_cache())


class GlobalAvgPool(Layer):
    def forward(self, x):
        y, self._cache = ops.global_avgpool_forward(x)
        return y

    def backward(self, dy):
        return ops.global_avgpool_backward(dy, self._take_cache())


class SEGate(Layer):
    """Channel recalibration from the per-channel spatial mean.

    beta starts at 1 and gamma at 0 so the gate opens near sigmoid(s_c).
    """

    def __init__(self, channels):
        super().__init__()
        self.beta = Parameter(np.ones(channels, dtype=np.float32))
        self.gamma = Parameter(np.zeros(channels, dtype=np.float32))

    def named_params(self):
        return [("beta", self.beta), ("gamma", self.gamma)]

    def forward(self, x):
        y, self._cache = ops.se_gate_forward(x, self.beta.data, self.gamma.data)
        return y

    def backward(self, dy):
        dx, dbeta, dgamma = ops.se_gate_backward(dy, self._take_cache())
        self.beta.add_grad(dbeta)
        self.gamma.add_grad(dgamma)
        return dx


class DepthwiseSeparable(Layer):
    """Per-channel spatial convolution followed by a 1x1 channel mix."""

    def __init__(self, in_channels, out_channels, kernel_size, rng):
        super().__init__()
        self.depth = Conv2d(
            in_channels,
            in_channels,
            kernel_size,
            rng,
            pad=kernel_size // 2,
            groups=in_channels,
        )
        self.point = Conv2d(in_channels, out_channels, 1, rng)

    def named_params(self):
        out = [("depth." + n, p) for n, p in self.depth.named_params()]
        out += [("point." + n, p) for n, p in self.point.named_params()]
        return out

    def forward(self, x):
        self._cache = ()
        return self.point.forward(self.depth.forward(x))

    def backward(self, dy):
        self._take_cache()
        return self.depth.backward(self.point.backward(dy))


class CBAM(Layer):
    """Channel attention from pooled descriptors, then spatial attention.

    Channel: mean and max spatial pools pass through a shared two-layer
    bottleneck; the summed logits gate channels after a sigmoid.
    Spatial: channelwise mean and max maps pass through a 7x7 conv whose
    sigmoid gates pixels.
    """

    def __init__(self, channels, rng, reduction=4, spatial_kernel=7):
        super().__init__()
        if channels % reduction:
            raise ValueError(f"reduction {reduction} must divide channels {channels}")
        hidden = channels // reduction
        self.w1 = Parameter(uniform_init(rng, (hidden, channels), channels))
        self.b1 = Parameter(np.zeros(hidden, dtype=np.float32))
        self.w2 = Parameter(uniform_init(rng, (channels, hidden), hidden))
        self.b2 = Parameter(np.zeros(channels, dtype=np.float32))
        fan_sp = 2 * spatial_kernel * spatial_kernel
        self.wsp = Parameter(
            uniform_init(rng, (1, 2, spatial_kernel, spatial_kernel), fan_sp)
        )
        self.bsp = Parameter(np.zeros(1, dtype=np.float32))
        self.spatial_kernel = spatial_kernel

    def named_params(self):
        return [
            ("w1", self.w1),
            ("b1", self.b1),
            ("w2", self.w2),
            ("b2", self.b2),
            ("wsp", self.wsp),
            ("bsp", self.bsp),
        ]

    def forward(self, x):
        n, c, h, w = x.shape
        s_avg = x.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)
        flat = x.reshape(n, c, h * w)
        ch_idx = flat.argmax(axis=2)
        s_max = np.take_along_axis(flat, ch_idx[:, :, None], axis=2)[:, :, 0]

        pre_avg = s_avg @ self.w1.data.T + self.b1.data
        pre_max = s_max @ self.w1.data.T + self.b1.data
        h_avg = np.maximum(pre_avg, 0)
        h_max = np.maximum(pre_max, 0)
        logits_c = (h_avg @ self.w2.data.T + self.b2.data) + (
            h_max @ self.w2.data.T + self.b2.data
        )
        a_c = ops.stable_sigmoid(logits_c)
        y1 = a_c[:, :, None, None] * x

        m_avg = y1.mean(axis=1, keepdims=True, dtype=np.float64).astype(x.dtype)
        sp_idx = y1.argmax(axis=1)
        m_max = np.take_along_axis(y1, sp_idx[:, None], axis=1)
        cat = np.concatenate([m_avg, m_max], axis=1)
        logits_s, conv_cache = ops.conv2d_forward(
            cat, self.wsp.data, self.bsp.data, pad=self.spatial_kernel // 2
        )
        a_s = ops.stable_sigmoid(logits_s)
        y = a_s * y1
        self._cache = (x, s_avg, s_max, ch_idx, pre_avg, pre_max, h_avg, h_max, a_c, y1,
                       sp_idx, conv_cache, a_s)
        return y

    def backward(self, dy):
        (x, s_avg, s_max, ch_idx, pre_avg, pre_max, h_avg, h_max, a_c, y1,
         sp_idx, conv_cache, a_s) = self._take_cache()
        n, c, h, w = x.shape

        da_s = (dy.astype(np.float64) * y1.astype(np.float64)).sum(
            axis=1, keepdims=True
        ).astype(x.dtype)
        dy1 = a_s * dy
        dlogits_s = da_s * a_s * (1.0 - a_s)
        dcat, dwsp, dbsp = ops.conv2d_backward(dlogits_s, conv_cache)
        self.wsp.add_grad(dwsp)
        self.bsp.add_grad(dbsp)
        dy1 = dy1 + dcat[:, 0:1] / c
        dmax = np.zeros_like(y1)
        np.put_along_axis(dmax, sp_idx[:, None], dcat[:, 1:2], axis=1)
        dy1 = dy1 + dmax

        da_c = (dy1.astype(np.float64) * x.astype(np.float64)).sum(axis=(2, 3)).astype(x.dtype)
        dx = a_c[:, :, None, None] * dy1
        dlogits_c = da_c * a_c * (1.0 - a_c)

        dw2 = (
            dlogits_c.astype(np.float64).T @ h_avg.astype(np.float64)
            + dlogits_c.astype(np.float64).T @ h_max.astype(np.float64)
        ).astype(x.dtype)
        db2 = 2.0 * dlogits_c.sum(axis=0, dtype=np.float64).astype(x.dtype)
        dh_avg = (dlogits_c @ self.w2.data) * (pre_avg > 0)
        dh_max = (dlogits_c @ self.w2.data) * (pre_max > 0)
        dw1 = (
            dh_avg.astype(np.float64).T @ s_avg.astype(np.float64)
            + dh_max.astype(np.float64).T @ s_max.astype(np.float64)
        ).astype(x.dtype)
        db1 = (dh_avg + dh_max).sum(axis=0, dtype=np.float64).astype(x.dtype)
        self.w2.add_grad(dw2)
        self.b2.add_grad(db2)
        self.w1.add_grad(dw1)
        self.b1.add_grad(db1)

        ds_avg = dh_avg @ self.w1.data
        ds_max = dh_max @ self.w1.data
        dx = dx + (ds_avg / (h * w))[:, :, None, None]
        dflat = np.zeros((n, c, h * w), dtype=x.dtype)
        np.put_along_axis(dflat, ch_idx[:, :, None], ds_max[:, :, None], axis=2)
        dx = dx + dflat.reshape(n, c, h, w)
        return dx
