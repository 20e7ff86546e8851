import numpy as np
import pytest

from hscl.engine import ops
from hscl.engine.backbone import ProjectionHead, BackboneConfig
from hscl.engine.layers import DepthwiseSeparable


def conv2d_oracle(x, w, b=None, stride=1, pad=0, groups=1):
    n, cin, h, wd = x.shape
    cout, cpg, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((n, cout, ho, wo))
    cog = cout // groups
    for ni in range(n):
        for co in range(cout):
            g = co // cog
            for oi in range(ho):
                for oj in range(wo):
                    acc = 0.0
                    for ci in range(cpg):
                        for ki in range(k):
                            for kj in range(k):
                                acc += (
                                    w[co, ci, ki, kj]
                                    * xp[ni, g * cpg + ci, oi * stride + ki, oj * stride + kj]
                                )
                    y[ni, co, oi, oj] = acc + (b[co] if b is not None else 0.0)
    return y


def conv3d_oracle(x, w, b=None, stride=(1, 1, 1), pad=(0, 0, 0)):
    n, cin, d, h, wd = x.shape
    f, _, kd, kh, kw = w.shape
    sd, sh, sw = stride
    pd, ph, pw = pad
    do = (d + 2 * pd - kd) // sd + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (pd, pd), (ph, ph), (pw, pw)))
    y = np.zeros((n, f, do, ho, wo))
    for ni in range(n):
        for fi in range(f):
            for oi in range(do):
                for oj in range(ho):
                    for ol in range(wo):
                        acc = 0.0
                        for ci in range(cin):
                            for ki in range(kd):
                                for kj in range(kh):
                                    for kl in range(kw):
                                        acc += (
                                            w[fi, ci, ki, kj, kl]
                                            * xp[
                                                ni,
                                                ci,
                                                oi * sd + ki,
                                                oj * sh + kj,
                                                ol * sw + kl,
                                            ]
                                        )
                        y[ni, fi, oi, oj, ol] = acc + (b[fi] if b is not None else 0.0)
    return y


class TestConv2d:
    def test_one_by_one_doubles(self, rng):
        x = rng.standard_normal((2, 3, 4, 4)).astype(np.float32)
        w = np.zeros((3, 3, 1, 1), dtype=np.float32)
        for c in range(3):
            w[c, c, 0, 0] = 2.0
        y, _ = ops.conv2d_forward(x, w)
        assert np.allclose(y, 2.0 * x)

    def test_box_kernel_preserves_constant_interior(self):
        x = np.full((1, 1, 6, 6), 5.0, dtype=np.float32)
        w = np.full((1, 1, 3, 3), 1.0 / 9.0, dtype=np.float32)
        y, _ = ops.conv2d_forward(x, w, pad=1)
        assert y.shape == (1, 1, 6, 6)
        assert np.allclose(y[0, 0, 1:-1, 1:-1], 5.0, atol=1e-6)
        assert np.all(y[0, 0, 0, :] < 5.0)

    def test_grouped_matches_loop_oracle(self, rng):
        x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
        w = rng.standard_normal((4, 1, 3, 3)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        y, _ = ops.conv2d_forward(x, w, b, pad=1, groups=2)
        assert np.abs(y - conv2d_oracle(x, w, b, pad=1, groups=2)).max() < 1e-6

    def test_strided_matches_loop_oracle(self, rng):
        # float64 probe so accumulation noise stays below the oracle tolerance
        x = rng.standard_normal((2, 3, 7, 7))
        w = rng.standard_normal((4, 3, 3, 3))
        y, _ = ops.conv2d_forward(x, w, stride=2)
        assert y.shape == (2, 4, 3, 3)
        assert np.abs(y - conv2d_oracle(x, w, stride=2)).max() < 1e-6

    def test_grouped_equals_independent_slices(self, rng):
        x = rng.standard_normal((2, 6, 5, 5)).astype(np.float32)
        w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        y, _ = ops.conv2d_forward(x, w, pad=1, groups=2)
        lo, _ = ops.conv2d_forward(x[:, :3], w[:2], pad=1)
        hi, _ = ops.conv2d_forward(x[:, 3:], w[2:], pad=1)
        assert np.allclose(y, np.concatenate([lo, hi], axis=1))

    def test_non_integral_output_extent_rejected(self, rng):
        x = rng.standard_normal((1, 1, 8, 8)).astype(np.float32)
        w = rng.standard_normal((1, 1, 3, 3)).astype(np.float32)
        with pytest.raises(ValueError, match="non-integral"):
            ops.conv2d_forward(x, w, stride=2)

    def test_even_kernel_rejected(self, rng):
        x = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)
        w = rng.standard_normal((1, 1, 2, 2)).astype(np.float32)
        with pytest.raises(ValueError, match="odd"):
            ops.conv2d_forward(x, w)

    def test_bad_grouping_rejected(self, rng):
        x = rng.standard_normal((1, 3, 4, 4)).astype(np.float32)
        w = rng.standard_normal((2, 1, 1, 1)).astype(np.float32)
        with pytest.raises(ValueError, match="groups"):
            ops.conv2d_forward(x, w, groups=2)

    def test_linear_case_kernel_grad_is_input_sum(self, rng):
        x = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)
        w = rng.standard_normal((1, 1, 1, 1)).astype(np.float32)
        y, cache = ops.conv2d_forward(x, w)
        _, dw, _ = ops.conv2d_backward(np.ones_like(y), cache)
        assert np.isclose(dw[0, 0, 0, 0], x.sum(), atol=1e-5)

    def test_backward_matches_transpose_oracle(self, rng):
        x = rng.standard_normal((2, 2, 6, 6)).astype(np.float32)
        w = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
        b = np.zeros(3, dtype=np.float32)
        y, cache = ops.conv2d_forward(x, w, b, pad=1)
        dy = rng.standard_normal(y.shape).astype(np.float32)
        dx, dw, db = ops.conv2d_backward(dy, cache)
        # dL/dx[p] = sum over outputs that touch p; brute force via oracle on basis vectors
        for probe in [(0, 1, 2, 3), (1, 0, 0, 0), (1, 1, 5, 5)]:
            e = np.zeros_like(x)
            e[probe] = 1.0
            contrib = (conv2d_oracle(e, w, None, pad=1) * dy).sum()
            assert np.isclose(dx[probe], contrib, atol=1e-4)


class TestConv3d:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((1, 1, 3, 4, 4)).astype(np.float32)
        w = np.ones((1, 1, 1, 1, 1), dtype=np.float32)
        y, _ = ops.conv3d_forward(x, w)
        assert np.allclose(y, x)

    def test_spectral_box_on_spectrally_constant_input(self, rng):
        plane = rng.standard_normal((1, 1, 1, 4, 4)).astype(np.float32)
        x = np.repeat(plane, 5, axis=2)
        w = np.zeros((1, 1, 3, 1, 1), dtype=np.float32)
        w[0, 0, :, 0, 0] = 1.0 / 3.0
        y, _ = ops.conv3d_forward(x, w)
        assert y.shape == (1, 1, 3, 4, 4)
        assert np.allclose(y, x[:, :, 1:-1], atol=1e-6)

    def test_matches_loop_oracle(self, rng):
        x = rng.standard_normal((2, 2, 4, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3, 3))
        b = rng.standard_normal(3)
        y, _ = ops.conv3d_forward(x, w, b, pad=(1, 1, 1))
        assert np.abs(y - conv3d_oracle(x, w, b, pad=(1, 1, 1))).max() < 1e-6

    def test_non_integral_extent_rejected(self, rng):
        x = rng.standard_normal((1, 1, 4, 4, 4)).astype(np.float32)
        w = rng.standard_normal((1, 1, 3, 3, 3)).astype(np.float32)
        with pytest.raises(ValueError, match="non-integral"):
            ops.conv3d_forward(x, w, stride=(2, 2, 2))


class TestDepthwiseSeparable:
    def test_composition_oracle(self, rng):
        layer = DepthwiseSeparable(3, 5, 3, rng)
        x = rng.standard_normal((2, 3, 6, 6)).astype(np.float32)
        y = layer.forward(x)
        mid, _ = ops.conv2d_forward(x, layer.depth.weight.data, layer.depth.bias.data,
                                    pad=1, groups=3)
        ref, _ = ops.conv2d_forward(mid, layer.point.weight.data, layer.point.bias.data)
        assert np.allclose(y, ref, atol=1e-6)

    def test_equals_composed_kernel_bank(self, rng):
        layer = DepthwiseSeparable(3, 4, 3, rng)
        layer.depth.bias.data[:] = 0
        layer.point.bias.data[:] = 0
        x = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
        y = layer.forward(x)
        composed = np.einsum(
            "oc,cij->ocij", layer.point.weight.data[:, :, 0, 0], layer.depth.weight.data[:, 0]
        )
        ref, _ = ops.conv2d_forward(x, composed.astype(np.float32), pad=1)
        assert np.abs(y - ref).max() < 1e-5

    def test_identity_kernels_pass_input_through(self, rng):
        layer = DepthwiseSeparable(2, 2, 3, rng)
        layer.depth.weight.data[:] = 0
        layer.depth.weight.data[:, 0, 1, 1] = 1.0
        layer.depth.bias.data[:] = 0
        layer.point.weight.data[:] = 0
        for c in range(2):
            layer.point.weight.data[c, c, 0, 0] = 1.0
        layer.point.bias.data[:] = 0
        x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
        assert np.allclose(layer.forward(x), x)

    def test_single_channel_equals_plain_conv(self, rng):
        layer = DepthwiseSeparable(1, 1, 3, rng)
        layer.point.weight.data[0, 0, 0, 0] = 1.0
        layer.point.bias.data[:] = 0
        layer.depth.bias.data[:] = 0
        x = rng.standard_normal((1, 1, 6, 6)).astype(np.float32)
        ref, _ = ops.conv2d_forward(x, layer.depth.weight.data, pad=1)
        assert np.allclose(layer.forward(x), ref, atol=1e-6)


class TestSEGate:
    def test_zero_gate_halves_input_exactly(self, rng):
        x = rng.standard_normal((2, 4, 3, 3)).astype(np.float32)
        y, _ = ops.se_gate_forward(x, np.zeros(4, np.float32), np.zeros(4, np.float32))
        assert np.array_equal(y, 0.5 * x)

    def test_squeeze_is_spatial_mean(self):
        x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32).reshape(1, 1, 2, 2)
        _, cache = ops.se_gate_forward(x, np.ones(1, np.float32), np.zeros(1, np.float32))
        s = cache[2]
        assert s[0, 0] == pytest.approx(2.5)

    def test_saturated_gate_passes_channel(self, rng):
        x = np.abs(rng.standard_normal((1, 2, 4, 4))).astype(np.float32) + 0.1
        beta = np.full(2, 1000.0, dtype=np.float32)
        y, _ = ops.se_gate_forward(x, beta, np.zeros(2, np.float32))
        assert np.abs(y - x).max() < 1e-6

    def test_preserves_sign_and_zero_pattern(self, rng):
        x = rng.standard_normal((2, 3, 4, 4)).astype(np.float32)
        x[0, 1, 2, 2] = 0.0
        y, _ = ops.se_gate_forward(
            x, rng.standard_normal(3).astype(np.float32), rng.standard_normal(3).astype(np.float32)
        )
        assert np.array_equal(np.sign(y), np.sign(x))

    def test_gate_shape_mismatch(self, rng):
        x = rng.standard_normal((1, 3, 2, 2)).astype(np.float32)
        with pytest.raises(ValueError, match="gate"):
            ops.se_gate_forward(x, np.zeros(2, np.float32), np.zeros(2, np.float32))


class TestProjectionHead:
    def config(self, d, dp):
        return BackboneConfig(
            input_bands=4, patch_size=8, stage_channels=(4, d), embedding_dim=d,
            projection_dim=dp, cardinality=1,
        )

    def test_identity_weights_clip_negative(self, rng):
        head = ProjectionHead(self.config(2, 2), rng)
        head.fc1.weight.data = np.eye(2, dtype=np.float32)
        head.fc1.bias.data[:] = 0
        head.fc2.weight.data = np.eye(2, dtype=np.float32)
        head.fc2.bias.data[:] = 0
        z = head.forward(np.array([[1.0, -1.0]], dtype=np.float32))
        assert np.allclose(z, [[1.0, 0.0]])

    def test_zero_input_returns_output_bias(self, rng):
        head = ProjectionHead(self.config(4, 3), rng)
        head.fc1.bias.data[:] = 0
        head.fc2.bias.data = np.array([0.5, -1.0, 2.0], dtype=np.float32)
        z = head.forward(np.zeros((2, 4), dtype=np.float32))
        assert np.allclose(z, [[0.5, -1.0, 2.0]] * 2)

    def test_matches_matrix_oracle(self, rng):
        head = ProjectionHead(self.config(6, 4), rng)
        f = rng.standard_normal((3, 6)).astype(np.float32)
        z = head.forward(f)
        hid = np.maximum(f @ head.fc1.weight.data.T + head.fc1.bias.data, 0)
        ref = hid @ head.fc2.weight.data.T + head.fc2.bias.data
        assert np.abs(z - ref).max() < 1e-6


class TestPoolingAndNorm:
    def test_avgpool_blocks(self):
        x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
        y, _ = ops.avgpool2_forward(x)
        assert np.allclose(y[0, 0], [[2.5, 4.5], [10.5, 12.5]])

    def test_avgpool_odd_extent_rejected(self, rng):
        with pytest.raises(ValueError, match="even"):
            ops.avgpool2_forward(rng.standard_normal((1, 1, 3, 4)).astype(np.float32))

    def test_avgpool_backward_spreads_evenly(self, rng):
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        y, cache = ops.avgpool2_forward(x)
        dx = ops.avgpool2_backward(np.ones_like(y), cache)
        assert np.allclose(dx, 0.25)

    def test_global_avgpool(self, rng):
        x = rng.standard_normal((2, 3, 5, 5)).astype(np.float32)
        y, cache = ops.global_avgpool_forward(x)
        assert np.allclose(y, x.mean(axis=(2, 3)), atol=1e-6)
        dx = ops.global_avgpool_backward(np.ones_like(y), cache)
        assert np.allclose(dx, 1.0 / 25.0)

    def test_l2_normalize_rows(self, rng):
        v = rng.standard_normal((4, 6)).astype(np.float32)
        z, _ = ops.l2_normalize_forward(v)
        assert np.allclose((z**2).sum(axis=1), 1.0, atol=1e-6)

    def test_l2_normalize_zero_row_rejected(self):
        v = np.zeros((2, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="zero-norm"):
            ops.l2_normalize_forward(v)

    def test_l2_normalize_gradient_orthogonal_to_output(self, rng):
        v = rng.standard_normal((3, 5)).astype(np.float64)
        z, cache = ops.l2_normalize_forward(v)
        dz = rng.standard_normal(z.shape)
        dv = ops.l2_normalize_backward(dz, cache)
        # moving along v cannot change v/|v|
        assert np.abs((dv * v).sum(axis=1)).max() < 1e-10


class TestLinear:
    def test_matches_oracle(self, rng):
        x = rng.standard_normal((3, 4)).astype(np.float32)
        w = rng.standard_normal((2, 4)).astype(np.float32)
        b = rng.standard_normal(2).astype(np.float32)
        y, cache = ops.linear_forward(x, w, b)
        assert np.allclose(y, x @ w.T + b, atol=1e-6)
        dy = rng.standard_normal(y.shape).astype(np.float32)
        dx, dw, db = ops.linear_backward(dy, cache)
        assert np.allclose(dx, dy @ w, atol=1e-6)
        assert np.allclose(dw, dy.T @ x, atol=1e-5)
        assert np.allclose(db, dy.sum(axis=0), atol=1e-6)

    def test_shape_validation(self, rng):
        with pytest.raises(ValueError, match="incompatible"):
            ops.linear_forward(
                np.zeros((2, 3), np.float32), np.zeros((2, 4), np.float32),
                np.zeros(2, np.float32),
            )
