"""Layer types for the 1D CNN.

Every layer works on batched arrays: conv/pool layers take ``(B, C, L)``,
dense layers take ``(B, features)``. ``forward`` caches whatever ``backward``
needs; ``backward`` returns the gradient w.r.t. the layer input and stores
parameter gradients in ``self.grads`` (same order as ``self.params``).
"""

import numpy as np

from ..errors import ShapeMismatch
from . import kernels
from .functional import relu, relu_backward, sigmoid, sigmoid_backward


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = []
        self.grads = []
        self._cache = None

    def forward(self, x, cache=True):
        raise NotImplementedError

    def backward(self, gout):
        raise NotImplementedError

    def output_shape(self, in_shape):
        return in_shape

    def describe(self):
        return {"type": self.kind}

    def init_params(self, rng):
        pass

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.describe().items() if k != "type")
        return f"{type(self).__name__}({args})"


class Conv1d(Layer):
    kind = "conv1d"

    def __init__(self, in_ch, out_ch, kernel=3, stride=1):
        super().__init__()
        if stride != 1:
            raise ShapeMismatch("only stride-1 convolutions are supported")
        self.in_ch, self.out_ch, self.kernel, self.stride = in_ch, out_ch, kernel, stride
        self.w = np.zeros((out_ch, in_ch, kernel))
        self.b = np.zeros(out_ch)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]

    def init_params(self, rng):
        lim = np.sqrt(6.0 / (self.in_ch * self.kernel))
        self.w[...] = rng.uniform(-lim, lim, self.w.shape)
        self.b[...] = 0.0

    def forward(self, x, cache=True):
        if x.ndim != 3 or x.shape[1] != self.in_ch or x.shape[2] < self.kernel:
            raise ShapeMismatch(f"conv1d expects (B, {self.in_ch}, L>={self.kernel}), got {x.shape}")
        if cache:
            self._cache = x
        w, b = self.w.astype(x.dtype, copy=False), self.b.astype(x.dtype, copy=False)
        return kernels.conv1d_forward(np.ascontiguousarray(x), w, b)

    def backward(self, gout):
        x = self._cache
        gx, gw, gb = kernels.conv1d_backward(np.ascontiguousarray(gout), x, self.w)
        self.grads[0][...] = gw
        self.grads[1][...] = gb
        return gx

    def output_shape(self, in_shape):
        ch, n = in_shape
        if ch != self.in_ch or n < self.kernel:
            raise ShapeMismatch(f"conv1d({self.in_ch}->{self.out_ch}) cannot take {in_shape}")
        return (self.out_ch, n - self.kernel + 1)

    def describe(self):
        return {"type": self.kind, "in_ch": self.in_ch, "out_ch": self.out_ch,
                "kernel": self.kernel, "stride": self.stride}


class MaxPool1d(Layer):
    kind = "maxpool1d"

    def __init__(self, pool, stride=None):
        super().__init__()
        if pool < 1:
            raise ShapeMismatch("pool must be >= 1")
        self.pool = int(pool)
        self.stride = int(stride if stride is not None else pool)

    def forward(self, x, cache=True):
        if x.ndim != 3 or x.shape[2] < self.pool:
            raise ShapeMismatch(f"maxpool1d({self.pool}) got {x.shape}")
        out, idx = kernels.maxpool1d_forward(np.ascontiguousarray(x), self.pool, self.stride)
        if cache:
            self._cache = (idx, x.shape[2])
        return out

    def backward(self, gout):
        idx, n = self._cache
        return kernels.maxpool1d_backward(np.ascontiguousarray(gout), idx, n)

    def output_shape(self, in_shape):
        ch, n = in_shape
        if n < self.pool:
            raise ShapeMismatch(f"maxpool1d({self.pool}) cannot take length {n}")
        return (ch, (n - self.pool) // self.stride + 1)

    def describe(self):
        return {"type": self.kind, "pool": self.pool, "stride": self.stride}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, cache=True):
        if cache:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gout):
        return gout.reshape(self._cache)

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.w = np.zeros((n_out, n_in))
        self.b = np.zeros(n_out)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]

    def init_params(self, rng):
        lim = np.sqrt(6.0 / self.n_in)
        self.w[...] = rng.uniform(-lim, lim, self.w.shape)
        self.b[...] = 0.0

    def forward(self, x, cache=True):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeMismatch(f"dense expects (B, {self.n_in}), got {x.shape}")
        if cache:
            self._cache = x
        return x @ self.w.T.astype(x.dtype, copy=False) + self.b.astype(x.dtype, copy=False)

    def backward(self, gout):
        x = self._cache
        self.grads[0][...] = gout.T @ x
        self.grads[1][...] = gout.sum(axis=0)
        return gout @ self.w

    def output_shape(self, in_shape):
        if in_shape != (self.n_in,):
            raise ShapeMismatch(f"dense({self.n_in}->{self.n_out}) cannot take {in_shape}")
        return (self.n_out,)

    def describe(self):
        return {"type": self.kind, "in": self.n_in, "out": self.n_out}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, cache=True):
        if cache:
            self._cache = x
        return relu(x)

    def backward(self, gout):
        return relu_backward(gout, self._cache)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, cache=True):
        y = sigmoid(x)
        if cache:
            self._cache = y
        return y

    def backward(self, gout):
        return sigmoid_backward(gout, self._cache)


_KINDS = {cls.kind: cls for cls in (Conv1d, MaxPool1d, Flatten, Dense, ReLU, Sigmoid)}


def layer_from_dict(d):
    d = dict(d)
    kind = d.pop("type")
    if kind not in _KINDS:
        raise ShapeMismatch(f"unknown layer type {kind!r}")
    if kind == "dense":
        return Dense(d["in"], d["out"])
    return _KINDS[kind](**d)
