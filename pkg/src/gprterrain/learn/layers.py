"""Layers with explicit forward/backward passes on float64 numpy arrays.

Every layer caches what it needs during ``forward`` and consumes it in
``backward``, which accumulates parameter gradients into ``Parameter.grad``
and returns the gradient with respect to the layer input. Batches come first:
1-D layers take ``(n, channels, length)``, 2-D layers ``(n, channels, h, w)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    pass


@dataclass(eq=False)
class Parameter:
    """A trainable array with its gradient and Adam moment estimates."""

    value: np.ndarray
    name: str = ""
    grad: np.ndarray = field(init=False)
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _expect_ndim(x: np.ndarray, ndim: int, layer: str, detail: str):
    if x.ndim != ndim:
        raise ShapeError(f"{layer} expects {detail}, got shape {x.shape}")


class Layer:
    params: tuple[Parameter, ...] = ()

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)


class Conv1d(Layer):
    """Cross-correlation over the last axis with ``padding`` zeros on both sides."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 5,
                 padding: int = 0, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.k, self.padding = kernel_size, padding
        fan_in = in_channels * kernel_size
        self.weight = Parameter(he_uniform(rng, (out_channels, in_channels, kernel_size), fan_in), "conv1d.weight")
        self.bias = Parameter(np.zeros(out_channels), "conv1d.bias")
        self.params = (self.weight, self.bias)

    def forward(self, x):
        _expect_ndim(x, 3, "Conv1d", "(n, channels, length)")
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"Conv1d expects {self.in_channels} input channels, got shape {x.shape}")
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p))) if p else x
        n, c, length = xp.shape
        out_len = length - self.k + 1
        if out_len < 1:
            raise ShapeError(f"Conv1d kernel {self.k} does not fit input shape {x.shape}")
        cols = sliding_window_view(xp, self.k, axis=2)  # n, c, out_len, k
        cols = cols.transpose(0, 2, 1, 3).reshape(n * out_len, c * self.k)
        w = self.weight.value.reshape(self.out_channels, -1)
        out = cols @ w.T + self.bias.value
        self._cache = (cols, xp.shape, out_len)
        return out.reshape(n, out_len, self.out_channels).transpose(0, 2, 1)

    def backward(self, grad):
        cols, xp_shape, out_len = self._cache
        n, c, _ = xp_shape
        g = grad.transpose(0, 2, 1).reshape(n * out_len, self.out_channels)
        self.weight.grad += (g.T @ cols).reshape(self.weight.shape)
        self.bias.grad += g.sum(axis=0)
        dcols = (g @ self.weight.value.reshape(self.out_channels, -1)).reshape(n, out_len, c, self.k)
        dx = np.zeros(xp_shape)
        for i in range(self.k):
            dx[:, :, i:i + out_len] += dcols[:, :, :, i].transpose(0, 2, 1)
        p = self.padding
        return dx[:, :, p:dx.shape[2] - p] if p else dx


def _conv2d_valid(xp: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Valid cross-correlation of (n, c, h, w) with (f, c, k, k).

    Returns the output and the (c*k*k, n*oh*ow) patch matrix; patches are
    laid out so the copy reads contiguous rows of the input.
    """
    n, c, h, wd = xp.shape
    f, _, k, _ = w.shape
    oh, ow = h - k + 1, wd - k + 1
    cols = sliding_window_view(xp, (k, k), axis=(2, 3))  # n, c, oh, ow, k, k
    cols = cols.transpose(1, 4, 5, 0, 2, 3).reshape(c * k * k, n * oh * ow)
    out = w.reshape(f, -1) @ cols
    return out.reshape(f, n, oh, ow).transpose(1, 0, 2, 3), cols


class Conv2d(Layer):
    """Square-kernel 2-D cross-correlation with symmetric zero padding.

    The input gradient is the full correlation of the output gradient with the
    flipped kernel. Set ``input_grad=False`` on a first layer to skip it.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 padding: int = 1, rng: np.random.Generator | None = None, input_grad: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        if not 0 <= padding < kernel_size:
            raise ValueError(f"padding must lie in [0, {kernel_size}), got {padding}")
        self.in_channels, self.out_channels = in_channels, out_channels
        self.k, self.padding = kernel_size, padding
        self.input_grad = input_grad
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(
            he_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in), "conv2d.weight")
        self.bias = Parameter(np.zeros(out_channels), "conv2d.bias")
        self.params = (self.weight, self.bias)

    def forward(self, x):
        _expect_ndim(x, 4, "Conv2d", "(n, channels, height, width)")
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"Conv2d expects {self.in_channels} input channels, got shape {x.shape}")
        p, k = self.padding, self.k
        if x.shape[2] + 2 * p < k or x.shape[3] + 2 * p < k:
            raise ShapeError(f"Conv2d kernel {k}x{k} does not fit input shape {x.shape}")
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        out, cols = _conv2d_valid(xp, self.weight.value)
        self._cols = cols
        return out + self.bias.value[None, :, None, None]

    def backward(self, grad):
        f = grad.shape[1]
        g = grad.transpose(1, 0, 2, 3).reshape(f, -1)
        self.weight.grad += (g @ self._cols.T).reshape(self.weight.shape)
        self.bias.grad += g.sum(axis=1)
        if not self.input_grad:
            return None
        q = self.k - 1 - self.padding
        gp = np.pad(grad, ((0, 0), (0, 0), (q, q), (q, q))) if q else grad
        w_flip = self.weight.value[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        dx, _ = _conv2d_valid(gp, np.ascontiguousarray(w_flip))
        return dx


def _first_max_masks(views: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Elementwise max over ``views`` and one-hot masks marking the first maximum."""
    m = views[0]
    for v in views[1:]:
        m = np.maximum(m, v)
    taken = np.zeros(m.shape, dtype=bool)
    masks = []
    for v in views:
        hit = (v == m) & ~taken
        taken |= hit
        masks.append(hit)
    return m, masks


class MaxPool1d(Layer):
    """Non-overlapping max pooling; a trailing odd element is dropped.

    Ties route the gradient to the first (lowest index) maximum.
    """

    def __init__(self, size: int = 2):
        self.size = size

    def forward(self, x):
        _expect_ndim(x, 3, "MaxPool1d", "(n, channels, length)")
        s = self.size
        lo = x.shape[2] // s
        if lo < 1:
            raise ShapeError(f"MaxPool1d size {s} does not fit input shape {x.shape}")
        views = [x[:, :, i:lo * s:s] for i in range(s)]
        out, self._masks = _first_max_masks(views)
        self._shape = x.shape
        return out

    def backward(self, grad):
        s = self.size
        lo = grad.shape[2]
        dx = np.zeros(self._shape)
        for i, mask in enumerate(self._masks):
            dx[:, :, i:lo * s:s] = np.where(mask, grad, 0.0)
        return dx


class MaxPool2d(Layer):
    """Non-overlapping ``size x size`` max pooling with floor cropping.

    Ties route the gradient to the lowest flat input index in the window.
    """

    def __init__(self, size: int = 2):
        self.size = size

    def forward(self, x):
        _expect_ndim(x, 4, "MaxPool2d", "(n, channels, height, width)")
        s = self.size
        ho, wo = x.shape[2] // s, x.shape[3] // s
        if ho < 1 or wo < 1:
            raise ShapeError(f"MaxPool2d size {s} does not fit input shape {x.shape}")
        # row-major window order == increasing flat input index
        views = [x[:, :, i:ho * s:s, j:wo * s:s] for i in range(s) for j in range(s)]
        out, self._masks = _first_max_masks(views)
        self._shape = x.shape
        return out

    def backward(self, grad):
        s = self.size
        ho, wo = grad.shape[2:]
        dx = np.zeros(self._shape)
        for (i, j), mask in zip(((i, j) for i in range(s) for j in range(s)), self._masks):
            dx[:, :, i:ho * s:s, j:wo * s:s] = np.where(mask, grad, 0.0)
        return dx


class Upsample2d(Layer):
    """Nearest-neighbour upsampling by an integer factor."""

    def __init__(self, factor: int = 2):
        self.factor = factor

    def forward(self, x):
        _expect_ndim(x, 4, "Upsample2d", "(n, channels, height, width)")
        f = self.factor
        return x.repeat(f, axis=2).repeat(f, axis=3)

    def backward(self, grad):
        n, c, h, w = grad.shape
        f = self.factor
        return grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5))


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_features, self.out_features = in_features, out_features
        self.weight = Parameter(he_uniform(rng, (in_features, out_features), in_features), "dense.weight")
        self.bias = Parameter(np.zeros(out_features), "dense.bias")
        self.params = (self.weight, self.bias)

    def forward(self, x):
        _expect_ndim(x, 2, "Dense", "(n, features)")
        if x.shape[1] != self.in_features:
            raise ShapeError(f"Dense expects {self.in_features} features, got shape {x.shape}")
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad):
        self.weight.grad += self._x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        return grad @ self.weight.value.T


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Reshape(Layer):
    """Reshape the non-batch axes to ``shape``."""

    def __init__(self, *shape: int):
        self.shape = shape

    def forward(self, x):
        self._shape = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        return grad.reshape(self._shape)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Softmax(Layer):
    def forward(self, x):
        self._out = softmax(x)
        return self._out

    def backward(self, grad):
        s = self._out
        return s * (grad - np.sum(grad * s, axis=-1, keepdims=True))


class Sequential(Layer):
    def __init__(self, *layers: Layer):
        self.layers = list(layers)
        self.params = tuple(p for layer in self.layers for p in layer.params)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        return self.forward(np.zeros((1,) + tuple(input_shape))).shape[1:]
