"""Element-wise activations and the training losses."""

import numpy as np

from ..errors import InvalidLabel

# sigmoid output is kept strictly inside (0, 1) so a threshold of 1 always rejects
_S_LO = np.finfo(np.float64).tiny
_S_HI = np.nextafter(1.0, 0.0)

PROB_CLAMP = 1e-12


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(gout, x):
    return gout * (x > 0)


def sigmoid(x):
    """Logistic function ``1 / (1 + exp(-x))``, computed without overflow."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x.dtype, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    np.clip(out, _S_LO, _S_HI, out=out)
    return out


def sigmoid_backward(gout, s):
    return gout * s * (1.0 - s)


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(gout, p, axis=-1):
    return p * (gout - (gout * p).sum(axis=axis, keepdims=True))


def _check_one_hot(y):
    y = np.asarray(y, dtype=np.float64)
    ok = np.all((y == 0) | (y == 1), axis=-1) & (y.sum(axis=-1) == 1)
    if not np.all(ok):
        raise InvalidLabel("targets must be one-hot rows")
    return y


def categorical_cross_entropy(probs, one_hot):
    """``-sum(y * log p)`` per row, with ``p`` clamped to ``[1e-12, 1 - 1e-12]``."""
    y = _check_one_hot(one_hot)
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(y * np.log(p)).sum(axis=-1)


def one_hot(labels, n):
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n):
        raise InvalidLabel(f"labels must lie in [0, {n})")
    out = np.zeros((labels.size, n))
    out[np.arange(labels.size), labels] = 1.0
    return out


# Loss heads: each maps (logits, one-hot) to per-example loss and the gradient
# of that loss w.r.t. the logits (the sigmoid is folded in).


def cce_sigmoid(logits, y):
    """Categorical cross-entropy applied to sigmoid outputs, unnormalised."""
    s = sigmoid(logits)
    loss = categorical_cross_entropy(s, y)
    p = np.clip(s, PROB_CLAMP, 1.0 - PROB_CLAMP)
    live = (s > PROB_CLAMP) & (s < 1.0 - PROB_CLAMP)
    # d(-log s)/dz = -(1 - s) on the hot entry, zero elsewhere (and under the clamp)
    grad = np.where(live, -y * (1.0 - p), 0.0)
    return loss, grad


def cce_sigmoid_normalized(logits, y):
    """Categorical cross-entropy on sigmoid outputs rescaled to sum to one.

    This is how Keras-style ``categorical_crossentropy`` treats probabilities
    that do not already sum to one.
    """
    s = sigmoid(logits)
    total = s.sum(axis=-1, keepdims=True)
    q = s / total
    loss = categorical_cross_entropy(q, y)
    qc = np.clip(q, PROB_CLAMP, 1.0 - PROB_CLAMP)
    live = (q > PROB_CLAMP) & (q < 1.0 - PROB_CLAMP)
    # dL/dq_i = -y_i/q_i ; dq_i/ds_j = (delta_ij - q_i)/S ; ds_j/dz_j = s_j(1-s_j)
    gq = np.where(live, -y / qc, 0.0)
    gs = (gq - (gq * q).sum(axis=-1, keepdims=True)) / total
    return loss, gs * s * (1.0 - s)


def bce_sigmoid(logits, y):
    """One-vs-rest binary cross-entropy, summed over classes."""
    z = np.asarray(logits, dtype=np.float64)
    y = _check_one_hot(y)
    # log(1 + exp(-|z|)) form avoids overflow
    loss = (np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))).sum(axis=-1)
    return loss, sigmoid(z) - y


LOSSES = {
    "cce": cce_sigmoid,
    "cce_normalized": cce_sigmoid_normalized,
    "bce": bce_sigmoid,
}
