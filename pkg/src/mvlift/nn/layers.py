"""Minimal double-precision neural-network layers with hand-written backprop.

Design rules:

* Tensors are ``(B, C, H, W)`` float64 (NCHW) or ``(B, D)`` for dense layers.
* ``forward(x)`` is pure (no writes to the module) so concurrent inference on
  shared parameters is safe. ``forward_train(x)`` additionally returns an
  explicit cache that ``backward(dout, cache)`` consumes; nothing is stored
  on the module between calls.
* Parameters are created in a fixed order from a caller-provided
  ``numpy.random.Generator``, so equal seeds give bit-identical models.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ConfigError


class Param:
    """A learnable array plus its gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Fan-in-scaled uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in))."""
    bound = np.sqrt(6.0 / max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base class: tracks named parameters and child modules in creation order."""

    def __init__(self):
        self._params: list[tuple[str, Param]] = []
        self._children: list[tuple[str, "Module"]] = []

    def add_param(self, name: str, value: np.ndarray) -> Param:
        p = Param(value)
        self._params.append((name, p))
        return p

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children.append((name, module))
        return module

    def named_params(self, prefix: str = "") -> list[tuple[str, Param]]:
        out = [(prefix + name, p) for name, p in self._params]
        for cname, child in self._children:
            out.extend(child.named_params(prefix + cname + "."))
        return out

    def parameters(self) -> list[Param]:
        return [p for _, p in self.named_params()]

    def num_params(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_train(x)
        return y

    def forward_train(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, dout: np.ndarray, cache):
        raise NotImplementedError


class Conv2d(Module):
    """2D convolution (cross-correlation) with square kernel.

    ``init_gain`` scales the fan-in-scaled random init; layers that feed a
    residual sum use a reduced gain so activations stay O(1) through depth.
    """

    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator,
                 stride: int = 1, pad: int = 0, init_gain: float = 1.0):
        super().__init__()
        self.cin, self.cout, self.k, self.stride, self.pad = cin, cout, k, stride, pad
        self.w = self.add_param(
            "w", init_gain * he_uniform(rng, (cout, cin, k, k), cin * k * k))
        self.b = self.add_param("b", np.zeros(cout))

    def _out_size(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.pad - self.k) // self.stride + 1
        ow = (w + 2 * self.pad - self.k) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ConfigError(f"conv output would be empty for input {h}x{w} "
                              f"(k={self.k}, stride={self.stride}, pad={self.pad})")
        return oh, ow

    def _im2col(self, xp: np.ndarray, oh: int, ow: int) -> np.ndarray:
        b, c = xp.shape[:2]
        k, s = self.k, self.stride
        cols = np.empty((b, c, k, k, oh, ow))
        for ki in range(k):
            for kj in range(k):
                cols[:, :, ki, kj] = xp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s]
        return cols.reshape(b, c * k * k, oh * ow)

    def forward_train(self, x: np.ndarray):
        b, c, h, w = x.shape
        if c != self.cin:
            raise ConfigError(f"conv expected {self.cin} input channels, got {c}")
        if self.k == 1 and self.stride == 1 and self.pad == 0:
            y = np.einsum("oi,bihw->bohw", self.w.value[:, :, 0, 0], x, optimize=True)
            y += self.b.value[None, :, None, None]
            return y, (x, None, h, w)
        oh, ow = self._out_size(h, w)
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad), (self.pad, self.pad)))
        cols = self._im2col(xp, oh, ow)
        w2d = self.w.value.reshape(self.cout, -1)
        y = (w2d @ cols).reshape(b, self.cout, oh, ow)
        y += self.b.value[None, :, None, None]
        return y, (None, cols, h, w)

    def backward(self, dout: np.ndarray, cache):
        x, cols, h, w = cache
        b = dout.shape[0]
        if self.k == 1 and self.stride == 1 and self.pad == 0:
            self.w.grad[:, :, 0, 0] += np.einsum("bohw,bihw->oi", dout, x, optimize=True)
            self.b.grad += dout.sum(axis=(0, 2, 3))
            return np.einsum("oi,bohw->bihw", self.w.value[:, :, 0, 0], dout, optimize=True)
        oh, ow = dout.shape[2], dout.shape[3]
        df = dout.reshape(b, self.cout, oh * ow)
        self.w.grad += np.einsum("bco,bko->ck", df, cols,
                                 optimize=True).reshape(self.w.value.shape)
        self.b.grad += dout.sum(axis=(0, 2, 3))
        w2d = self.w.value.reshape(self.cout, -1)
        dcols = np.einsum("ck,bco->bko", w2d, df, optimize=True)
        dcols = dcols.reshape(b, self.cin, self.k, self.k, oh, ow)
        hp, wp = h + 2 * self.pad, w + 2 * self.pad
        dxp = np.zeros((b, self.cin, hp, wp))
        s = self.stride
        for ki in range(self.k):
            for kj in range(self.k):
                dxp[:, :, ki:ki + s * oh:s, kj:kj + s * ow:s] += dcols[:, :, ki, kj]
        if self.pad:
            return dxp[:, :, self.pad:-self.pad, self.pad:-self.pad]
        return dxp


class Linear(Module):
    def __init__(self, din: int, dout: int, rng: np.random.Generator,
                 init_gain: float = 1.0):
        super().__init__()
        self.din, self.dout = din, dout
        self.w = self.add_param("w", init_gain * he_uniform(rng, (din, dout), din))
        self.b = self.add_param("b", np.zeros(dout))

    def forward_train(self, x: np.ndarray):
        if x.ndim != 2 or x.shape[1] != self.din:
            raise ConfigError(f"linear expected (B, {self.din}), got {x.shape}")
        return x @ self.w.value + self.b.value, x

    def backward(self, dout: np.ndarray, cache):
        x = cache
        self.w.grad += x.T @ dout
        self.b.grad += dout.sum(axis=0)
        return dout @ self.w.value.T


class ReLU(Module):
    def forward_train(self, x: np.ndarray):
        mask = x > 0
        return x * mask, mask

    def backward(self, dout: np.ndarray, cache):
        return dout * cache


class MaxPool2(Module):
    """2x2 max pooling, stride 2. Ties route gradient to the first maximum."""

    def _blocks(self, x: np.ndarray) -> np.ndarray:
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ConfigError(f"maxpool needs even spatial dims, got {h}x{w}")
        xr = x.reshape(b, c, h // 2, 2, w // 2, 2)
        return xr.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)

    def forward_train(self, x: np.ndarray):
        blocks = self._blocks(x)
        idx = blocks.argmax(axis=-1)
        y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
        return y, (idx, x.shape)

    def backward(self, dout: np.ndarray, cache):
        idx, shape = cache
        b, c, h, w = shape
        dblocks = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(dblocks, idx[..., None], dout[..., None], axis=-1)
        dx = dblocks.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return dx.reshape(b, c, h, w)


class UpsampleNearest2(Module):
    def forward_train(self, x: np.ndarray):
        return x.repeat(2, axis=2).repeat(2, axis=3), x.shape

    def backward(self, dout: np.ndarray, cache):
        b, c, h, w = cache
        return dout.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5))


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            self.add_child(str(i), layer)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_train(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, c = layer.forward_train(x)
            caches.append(c)
        return x, caches

    def backward(self, dout: np.ndarray, cache):
        for layer, c in zip(reversed(self.layers), reversed(cache)):
            dout = layer.backward(dout, c)
        return dout


class ResidualModule(Module):
    """Bottlenecked residual block: 1x1 -> 3x3 -> 1x1 with a shortcut.

    The bottleneck width is half the output channels. The shortcut is the
    identity when shapes allow it; with ``project_shortcut=True`` (or when
    channel counts differ) a learned 1x1 projection is used instead, which
    makes the whole module vanish when all its weights are zero.
    """

    def __init__(self, cin: int, cout: int, rng: np.random.Generator,
                 project_shortcut: bool = False, path_gain: float = 0.25):
        super().__init__()
        mid = max(1, cout // 2)
        self.conv1 = self.add_child("conv1", Conv2d(cin, mid, 1, rng))
        self.relu1 = ReLU()
        self.conv2 = self.add_child("conv2", Conv2d(mid, mid, 3, rng, pad=1))
        self.relu2 = ReLU()
        self.conv3 = self.add_child("conv3",
                                    Conv2d(mid, cout, 1, rng, init_gain=path_gain))
        self.shortcut: Optional[Conv2d] = None
        if project_shortcut or cin != cout:
            self.shortcut = Conv2d(cin, cout, 1, rng, init_gain=0.5)
            self.add_child("shortcut", self.shortcut)

    def forward(self, x: np.ndarray) -> np.ndarray:
        s = x if self.shortcut is None else self.shortcut.forward(x)
        p = self.conv1.forward(x)
        p = np.maximum(p, 0.0)
        p = self.conv2.forward(p)
        p = np.maximum(p, 0.0)
        return s + self.conv3.forward(p)

    def forward_train(self, x: np.ndarray):
        if self.shortcut is None:
            s, cs = x, None
        else:
            s, cs = self.shortcut.forward_train(x)
        p, c1 = self.conv1.forward_train(x)
        p, r1 = self.relu1.forward_train(p)
        p, c2 = self.conv2.forward_train(p)
        p, r2 = self.relu2.forward_train(p)
        p, c3 = self.conv3.forward_train(p)
        return s + p, (cs, c1, r1, c2, r2, c3)

    def backward(self, dout: np.ndarray, cache):
        cs, c1, r1, c2, r2, c3 = cache
        dp = self.conv3.backward(dout, c3)
        dp = self.relu2.backward(dp, r2)
        dp = self.conv2.backward(dp, c2)
        dp = self.relu1.backward(dp, r1)
        dx = self.conv1.backward(dp, c1)
        if self.shortcut is None:
            dx += dout
        else:
            dx += self.shortcut.backward(dout, cs)
        return dx
