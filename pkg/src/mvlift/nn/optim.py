"""Gradient-descent optimizers over :class:`~mvlift.nn.layers.Param` lists."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .layers import Param


class Optimizer:
    def __init__(self, params: list[Param], lr: float):
        if lr < 0:
            raise ConfigError(f"learning rate must be non-negative, got {lr}")
        self.params = list(params)
        self.lr = lr

    def zero_grad(self):
        for p in self.params:
            p.grad[...] = 0.0

    def step(self):
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(self, params: list[Param], lr: float, momentum: float = 0.0):
        super().__init__(params, lr)
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self._velocity):
            if self.momentum:
                v *= self.momentum
                v += p.grad
                p.value -= self.lr * v
            else:
                p.value -= self.lr * p.grad


class Adam(Optimizer):
    """Adaptive per-parameter gradient method with bias correction."""

    def __init__(self, params: list[Param], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * (p.grad * p.grad)
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def make_optimizer(name: str, params: list[Param], lr: float, **kwargs) -> Optimizer:
    name = name.lower()
    if name == "adam":
        return Adam(params, lr, **kwargs)
    if name == "sgd":
        return SGD(params, lr, **kwargs)
    raise ConfigError(f"unknown optimizer {name!r}")
