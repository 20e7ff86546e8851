"""Adam with bias correction and a stepped multiplier schedule."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    base_lr: float
    schedule: tuple = ()
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        self.schedule = tuple((int(t), float(mult)) for t, mult in self.schedule)
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be positive, got {self.base_lr}")
        if self.step < 0:
            raise ValueError(f"step must be >= 0, got {self.step}")
        for threshold, mult in self.schedule:
            if threshold < 0:
                raise ValueError(f"schedule threshold {threshold} must be >= 0")
            if not 0.0 < mult <= 1.0:
                raise ValueError(f"schedule multiplier {mult} must be in (0, 1]")


def effective_lr(state):
    lr = state.base_lr
    for threshold, mult in state.schedule:
        if threshold <= state.step:
            lr *= mult
    return lr


def adam_step(named_params, state, beta1=0.9, beta2=0.999, eps=1e-8):
    """One update over (name, Parameter) pairs; a missing grad counts as zero."""
    lr = effective_lr(state)
    t = state.step + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in named_params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ValueError(f"{name}: grad shape {g.shape} != param shape {p.data.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        elif m.shape != p.data.shape:
            raise ValueError(f"{name}: moment shape {m.shape} != param shape {p.data.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        mhat = m / bc1
        vhat = v / bc2
        p.data = p.data - lr * mhat / (np.sqrt(vhat) + eps)
    state.step += 1
