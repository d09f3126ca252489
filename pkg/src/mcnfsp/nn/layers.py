"""Layer types with explicit forward/backward passes.

Every layer is a frozen dataclass describing its shape.  ``forward`` returns the
output and a cache; ``backward`` takes the upstream gradient and that cache and
returns the input gradient plus a dict of parameter gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    def params(self) -> dict[str, tuple[int, ...]]:
        return {}

    def fans(self) -> tuple[int, int]:
        return (1, 1)

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        return shape

    def forward(self, x, p, train, rng):
        raise NotImplementedError

    def backward(self, dy, cache, p):
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Dense(Layer):
    n_in: int
    n_out: int

    def params(self):
        return {"W": (self.n_in, self.n_out), "b": (self.n_out,)}

    def fans(self):
        return (self.n_in, self.n_out)

    def output_shape(self, shape):
        if shape != (self.n_in,):
            raise ValueError(f"dense({self.n_in},{self.n_out}) got input shape {shape}")
        return (self.n_out,)

    def forward(self, x, p, train, rng):
        return x @ p["W"] + p["b"], x

    def backward(self, dy, x, p):
        return dy @ p["W"].T, {"W": x.T @ dy, "b": dy.sum(axis=0)}

    def describe(self):
        return f"dense({self.n_in},{self.n_out})"


@dataclass(frozen=True)
class Conv2d(Layer):
    """Stride-1 convolution with zero 'same' padding; weight is (out, in, k, k)."""

    in_ch: int
    out_ch: int
    k: int

    def params(self):
        return {"W": (self.out_ch, self.in_ch, self.k, self.k), "b": (self.out_ch,)}

    def fans(self):
        return (self.in_ch * self.k * self.k, self.out_ch * self.k * self.k)

    def output_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.in_ch:
            raise ValueError(f"{self.describe()} got input shape {shape}")
        if self.k % 2 != 1:
            raise ValueError("same padding needs an odd kernel")
        return (self.out_ch, shape[1], shape[2])

    def forward(self, x, p, train, rng):
        pad = self.k // 2
        B, C, H, W = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        # (B, C, H, W, k, k) -> (B, H, W, C*k*k)
        cols = sliding_window_view(xp, (self.k, self.k), axis=(2, 3))
        cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(B, H, W, C * self.k * self.k)
        wmat = p["W"].reshape(self.out_ch, -1).T
        y = cols @ wmat + p["b"]
        return y.transpose(0, 3, 1, 2), (cols, x.shape)

    def backward(self, dy, cache, p):
        cols, (B, C, H, W) = cache
        k, pad = self.k, self.k // 2
        dyt = dy.transpose(0, 2, 3, 1)  # (B, H, W, O)
        wmat = p["W"].reshape(self.out_ch, -1).T
        flat_cols = cols.reshape(-1, cols.shape[-1])
        flat_dy = dyt.reshape(-1, self.out_ch)
        dW = (flat_cols.T @ flat_dy).T.reshape(p["W"].shape)
        db = flat_dy.sum(axis=0)
        dcols = (dyt @ wmat.T).reshape(B, H, W, C, k, k)
        dxp = np.zeros((B, C, H + 2 * pad, W + 2 * pad), dtype=dy.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + H, j : j + W] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, pad : pad + H, pad : pad + W], {"W": dW, "b": db}

    def describe(self):
        return f"conv2d({self.in_ch},{self.out_ch},{self.k})"


@dataclass(frozen=True)
class BoardPlanes(Layer):
    """Reshape ``channels*h*w`` board features plus one trailing scalar into
    ``(channels + 1, h, w)`` planes, broadcasting the scalar over its plane."""

    channels: int
    height: int
    width: int

    def output_shape(self, shape):
        n = self.channels * self.height * self.width
        if shape != (n + 1,):
            raise ValueError(f"{self.describe()} expects input ({n + 1},), got {shape}")
        return (self.channels + 1, self.height, self.width)

    def forward(self, x, p, train, rng):
        B = x.shape[0]
        n = self.channels * self.height * self.width
        out = np.empty((B, self.channels + 1, self.height, self.width), dtype=x.dtype)
        out[:, : self.channels] = x[:, :n].reshape(B, self.channels, self.height, self.width)
        out[:, self.channels] = x[:, n, None, None]
        return out, None

    def backward(self, dy, cache, p):
        B = dy.shape[0]
        dx = np.empty((B, self.channels * self.height * self.width + 1), dtype=dy.dtype)
        dx[:, :-1] = dy[:, : self.channels].reshape(B, -1)
        dx[:, -1] = dy[:, self.channels].sum(axis=(1, 2))
        return dx, {}

    def describe(self):
        return f"planes({self.channels},{self.height},{self.width})"


@dataclass(frozen=True)
class Flatten(Layer):
    def output_shape(self, shape):
        return (math.prod(shape),)

    def forward(self, x, p, train, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, shape, p):
        return dy.reshape(shape), {}

    def describe(self):
        return "flatten"


@dataclass(frozen=True)
class ReLU(Layer):
    def forward(self, x, p, train, rng):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, mask, p):
        return dy * mask, {}

    def describe(self):
        return "relu"


@dataclass(frozen=True)
class Tanh(Layer):
    def forward(self, x, p, train, rng):
        y = np.tanh(x)
        return y, y

    def backward(self, dy, y, p):
        return dy * (1 - y * y), {}

    def describe(self):
        return "tanh"


@dataclass(frozen=True)
class Dropout(Layer):
    """Inverted dropout; identity outside training."""

    rate: float

    def forward(self, x, p, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in train mode needs an rng")
        keep = (rng.random(x.shape) >= self.rate).astype(x.dtype) / (1.0 - self.rate)
        return x * keep, keep

    def backward(self, dy, keep, p):
        return (dy if keep is None else dy * keep), {}

    def describe(self):
        return f"dropout({self.rate!r})"


@dataclass(frozen=True)
class Softmax(Layer):
    """Marks a probability head.  The network applies it through a stable
    log-sum-exp and losses differentiate through the logits directly."""

    def forward(self, x, p, train, rng):
        return softmax(x), None

    def describe(self):
        return "softmax"


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


_SIMPLE = {"relu": ReLU, "tanh": Tanh, "softmax": Softmax, "flatten": Flatten}
_PARAMETRIC = {"dense": Dense, "conv2d": Conv2d, "planes": BoardPlanes, "dropout": Dropout}


def parse_layer(text: str) -> Layer:
    text = text.strip()
    if text in _SIMPLE:
        return _SIMPLE[text]()
    name, _, rest = text.partition("(")
    if name not in _PARAMETRIC or not rest.endswith(")"):
        raise ValueError(f"unknown layer {text!r}")
    args = [a.strip() for a in rest[:-1].split(",")]
    if name == "dropout":
        return Dropout(float(args[0]))
    return _PARAMETRIC[name](*(int(a) for a in args))
