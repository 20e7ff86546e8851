"""Trainable parameter container shared by all layers."""

import numpy as np


class Parameter:
    """An array with an optional same-shape gradient slot.

    Gradients accumulate across backward calls until `zero_grad` resets
    them, so a parameter shared by several paths sums its contributions.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data):
        data = np.asarray(data)
        if not np.all(np.isfinite(data)):
            raise ValueError("parameter values must be finite")
        self.data = data
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def add_grad(self, grad):
        grad = np.asarray(grad)
        if grad.shape != self.data.shape:
            raise ValueError(
                f"gradient shape {grad.shape} does not match parameter shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = grad.astype(self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad.astype(self.data.dtype, copy=False)


def uniform_init(rng, shape, fan_in, dtype=np.float32):
    # weight scale sqrt(1/fan_in), biases are zeroed separately
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
