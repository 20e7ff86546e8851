"""Central finite-difference checks for layer gradients.

The probe runs in float64: parameters are temporarily cast, the input is
cast and, where it sits within 10h of a ReLU kink at zero, nudged away
(recorded in the report).  The scalar under test is sum(forward(x) * R)
for a fixed random R, giving analytic input and parameter gradients from
one backward call.
"""

from dataclasses import dataclass

import numpy as np

REL_ERR_FLOOR = 1e-6


@dataclass(frozen=True)
class GradCheckReport:
    layer: str
    max_rel_err: float
    tolerance: float
    passed: bool
    coords_checked: int
    jittered: int


def _rel_err(a, n):
    return abs(a - n) / max(abs(a), abs(n), REL_ERR_FLOOR)


def _coord_subset(size, max_coords, rng):
    if max_coords is None or size <= max_coords:
        return np.arange(size)
    return np.sort(rng.choice(size, size=max_coords, replace=False))


def gradient_check(layer, x, rng, tolerance=1e-3, h=1e-4, max_coords=None):
    """Compare analytic and central-difference gradients at one probe point."""
    x64 = np.asarray(x, dtype=np.float64).copy()
    jitter = np.abs(x64) < 10.0 * h
    x64[jitter] += 10.0 * h
    jittered = int(jitter.sum())

    params = layer.named_params()
    saved = [(p, p.data) for _, p in params]
    for _, p in params:
        p.data = p.data.astype(np.float64)
        p.grad = None

    try:
        y = layer.forward(x64)
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite forward output at the probe point")
        probe_rng = np.random.default_rng(rng.integers(0, 2**32))
        r = probe_rng.standard_normal(y.shape)
        dx = layer.backward(r.copy())
        if not np.all(np.isfinite(dx)):
            raise ValueError("non-finite input gradient at the probe point")

        def scalar():
            return float((layer.forward(x64) * r).sum())

        max_err = 0.0
        coords = 0

        flat_x = x64.reshape(-1)
        dx_flat = dx.reshape(-1)
        for idx in _coord_subset(flat_x.size, max_coords, probe_rng):
            orig = flat_x[idx]
            flat_x[idx] = orig + h
            up = scalar()
            flat_x[idx] = orig - h
            dn = scalar()
            flat_x[idx] = orig
            max_err = max(max_err, _rel_err(dx_flat[idx], (up - dn) / (2.0 * h)))
            coords += 1

        for name, p in params:
            if p.grad is None:
                raise ValueError(f"{name}: backward left no gradient")
            if not np.all(np.isfinite(p.grad)):
                raise ValueError(f"{name}: non-finite parameter gradient")
            flat_p = p.data.reshape(-1)
            g_flat = p.grad.reshape(-1)
            for idx in _coord_subset(flat_p.size, max_coords, probe_rng):
                orig = flat_p[idx]
                flat_p[idx] = orig + h
                up = scalar()
                flat_p[idx] = orig - h
                dn = scalar()
                flat_p[idx] = orig
                max_err = max(max_err, _rel_err(g_flat[idx], (up - dn) / (2.0 * h)))
                coords += 1
    finally:
        for p, data in saved:
            p.data = data
            p.grad = None
        layer._cache = None

    return GradCheckReport(
        layer=type(layer).__name__,
        max_rel_err=max_err,
        tolerance=tolerance,
        passed=max_err < tolerance,
        coords_checked=coords,
        jittered=jittered,
    )
