"""Central finite-difference checks for every layer type and loss head.

Shared by the unit tests and the acceptance suite. Each check builds a random
scalar objective ``sum(R * f(x))``, compares analytic gradients to
``(f(x+eps) - f(x-eps)) / 2 eps`` entry by entry and returns the worst
relative error.
"""

import numpy as np

from osrf.nn import Conv1d, Dense, MaxPool1d, ReLU, Sigmoid
from osrf.nn.functional import cce_sigmoid, softmax, softmax_backward

EPS = 1e-5
FLOOR = 1e-7  # denominators below this count as absolute error


def max_rel_error(analytic, numeric):
    a, n = np.asarray(analytic).ravel(), np.asarray(numeric).ravel()
    den = np.maximum(np.maximum(np.abs(a), np.abs(n)), FLOOR)
    return float(np.max(np.abs(a - n) / den))


def fd_grad(f, x, eps=EPS):
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def away_from_zero(rng, shape, margin=1e-2):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin + x, x)


def _layer_error(layer, x, rng):
    out = layer.forward(x.copy(), cache=True)
    r = rng.standard_normal(out.shape)
    gx = layer.backward(r)
    grads = [g.copy() for g in layer.grads]

    def obj():
        return float(np.sum(r * layer.forward(x, cache=False)))

    errs = [max_rel_error(gx, fd_grad(obj, x))]
    for p, g in zip(layer.params, grads):
        errs.append(max_rel_error(g, fd_grad(obj, p)))
    return max(errs)


def check_conv1d(seed):
    rng = np.random.default_rng(seed)
    layer = Conv1d(3, 4)
    layer.init_params(rng)
    layer.b[...] = rng.standard_normal(4)
    return _layer_error(layer, rng.standard_normal((2, 3, 11)), rng)


def check_maxpool1d(seed):
    rng = np.random.default_rng(seed)
    # distinct values spaced well beyond eps so the argmax never flips
    x = rng.permutation(2 * 3 * 16).reshape(2, 3, 16).astype(np.float64) * 0.01
    return _layer_error(MaxPool1d(4, 4), x, rng)


def check_dense(seed):
    rng = np.random.default_rng(seed)
    layer = Dense(7, 5)
    layer.init_params(rng)
    layer.b[...] = rng.standard_normal(5)
    return _layer_error(layer, rng.standard_normal((3, 7)), rng)


def check_relu(seed):
    rng = np.random.default_rng(seed)
    return _layer_error(ReLU(), away_from_zero(rng, (3, 2, 9)), rng)


def check_sigmoid(seed):
    rng = np.random.default_rng(seed)
    return _layer_error(Sigmoid(), rng.standard_normal((3, 6)) * 3, rng)


def check_softmax(seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, 6)) * 2
    r = rng.standard_normal(z.shape)
    analytic = softmax_backward(r, softmax(z))
    numeric = fd_grad(lambda: float(np.sum(r * softmax(z))), z)
    return max_rel_error(analytic, numeric)


def check_cce(seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((4, 5)) * 2
    y = np.eye(5)[rng.integers(0, 5, 4)]
    _, analytic = cce_sigmoid(z, y)
    numeric = fd_grad(lambda: float(cce_sigmoid(z, y)[0].sum()), z)
    return max_rel_error(analytic, numeric)


CHECKS = {
    "conv1d": check_conv1d,
    "maxpool1d": check_maxpool1d,
    "dense": check_dense,
    "relu": check_relu,
    "sigmoid": check_sigmoid,
    "softmax": check_softmax,
    "cce": check_cce,
}
