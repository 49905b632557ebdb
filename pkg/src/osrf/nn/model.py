"""The classifier: a layer stack plus training, inference and persistence."""

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    ChecksumMismatch,
    EmptyDataset,
    InvalidConfig,
    IoError,
    LabelOutOfRange,
    NonFiniteError,
    ShapeMismatch,
    VersionMismatch,
)
from ..rng import make_rng
from .functional import LOSSES, one_hot, sigmoid
from .layers import Conv1d, Dense, Sigmoid, layer_from_dict
from .optim import AdamState, adam_step

MODEL_MAGIC = b"OSRFMDL1"
MODEL_VERSION = 1


def default_architecture(input_shape, num_classes, conv_channels=(16, 32, 64), pool=4,
                         dense_units=(128,)):
    """Conv/ReLU/MaxPool head, dense tail, sigmoid output, as a layer list."""
    ch, n = input_shape
    arch = []
    for out_ch in conv_channels:
        arch += [
            {"type": "conv1d", "in_ch": ch, "out_ch": out_ch, "kernel": 3, "stride": 1},
            {"type": "relu"},
            {"type": "maxpool1d", "pool": pool, "stride": pool},
        ]
        ch, n = out_ch, (n - 2 - pool) // pool + 1
    arch.append({"type": "flatten"})
    width = ch * n
    for units in dense_units:
        arch += [{"type": "dense", "in": width, "out": units}, {"type": "relu"}]
        width = units
    arch += [{"type": "dense", "in": width, "out": num_classes}, {"type": "sigmoid"}]
    return arch


@dataclass
class Activations:
    logits: np.ndarray
    sigmoid: np.ndarray


class Model:
    def __init__(self, layers, input_shape, class_names=None):
        self.layers = list(layers)
        self.input_shape = tuple(int(v) for v in input_shape)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            if isinstance(layer, Conv1d) and (layer.kernel != 3 or layer.stride != 1):
                raise ShapeMismatch("convolutions must use kernel 3, stride 1")
        if len(self.layers) < 2 or not isinstance(self.layers[-1], Sigmoid) \
                or not isinstance(self.layers[-2], Dense):
            raise ShapeMismatch("model must end with Dense(., N) followed by Sigmoid")
        self.num_classes = shape[0]
        if class_names is not None and len(class_names) != self.num_classes:
            raise ShapeMismatch("need one class name per output")
        self.class_names = None if class_names is None else [str(c) for c in class_names]

    @classmethod
    def from_architecture(cls, arch, input_shape, seed=0, class_names=None):
        model = cls([layer_from_dict(d) for d in arch], input_shape, class_names)
        rng = make_rng(seed, "init")
        for layer in model.layers:
            layer.init_params(rng)
        return model

    def describe(self):
        return [layer.describe() for layer in self.layers]

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self):
        return [g for layer in self.layers for g in layer.grads]

    def _check_input(self, x):
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"model expects inputs of shape {self.input_shape}, got {x.shape[1:]}")

    def logits(self, x, cache=False):
        """Forward pass up to (not including) the output sigmoid."""
        self._check_input(x)
        for layer in self.layers[:-1]:
            x = layer.forward(x, cache=cache)
        return x

    def backward(self, grad_logits):
        g = grad_logits
        for layer in reversed(self.layers[:-1]):
            g = layer.backward(g)
        return g

    def predict_batch(self, x, batch_size=256, dtype=np.float64):
        """Logits and sigmoid values for a stack of inputs ``(n, C, L)``.

        ``dtype=np.float32`` runs a reduced-precision pass; the stored weights
        are untouched.
        """
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[None]
        self._check_input(x)
        out = []
        for i in range(0, len(x), batch_size):
            out.append(self.logits(x[i:i + batch_size].astype(dtype, copy=False)))
        z = np.concatenate(out, axis=0).astype(np.float64) if out else np.zeros((0, self.num_classes))
        return z, sigmoid(z)

    def predict(self, features):
        """Activations for a single feature matrix (or FeatureTensor)."""
        values = getattr(features, "values", features)
        z, s = self.predict_batch(np.asarray(values, dtype=np.float64)[None])
        return Activations(z[0], s[0])

    def copy(self):
        clone = Model([layer_from_dict(d) for d in self.describe()], self.input_shape, self.class_names)
        for dst, src in zip(clone.params, self.params):
            dst[...] = src
        return clone


# --------------------------------------------------------------------- training


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    shuffle_seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "bce"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfig("epochs and batch_size must be >= 1")
        if self.loss not in LOSSES:
            raise InvalidConfig(f"loss must be one of {sorted(LOSSES)}")


@dataclass
class TrainResult:
    model: Model
    losses: list = field(default_factory=list)


def _all_finite(arrays):
    return all(np.isfinite(a).all() for a in arrays)


def train(model, x, labels, cfg=None, on_epoch=None):
    """Mini-batch Adam training; mutates and returns ``model``.

    ``x`` is ``(n, C, L)``, ``labels`` integer class indices. The returned
    loss history holds the mean per-example loss of each epoch.
    """
    cfg = cfg or TrainConfig()
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if len(x) != len(labels):
        raise ShapeMismatch("features and labels differ in length")
    n_cls = model.num_classes
    if labels.min() < 0 or labels.max() >= n_cls:
        raise LabelOutOfRange(f"labels must lie in [0, {n_cls})")
    loss_fn = LOSSES[cfg.loss]
    state = AdamState.for_params(model.params, lr=cfg.lr, beta1=cfg.beta1,
                                 beta2=cfg.beta2, eps=cfg.eps)
    history = []
    n = len(labels)
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.shuffle_seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = np.asarray(x[idx], dtype=np.float64)
            yb = one_hot(labels[idx], n_cls)
            z = model.logits(xb, cache=True)
            loss, gz = loss_fn(z, yb)
            total += float(loss.sum())
            model.backward(gz / len(idx))
            adam_step(model.params, model.grads, state)
        mean = total / n
        if not np.isfinite(mean) or not _all_finite(model.params):
            raise NonFiniteError(f"non-finite loss or weights in epoch {epoch + 1}")
        history.append(mean)
        if on_epoch is not None:
            on_epoch(epoch, mean)
    return TrainResult(model, history)


# ------------------------------------------------------------------ persistence


def model_to_bytes(model):
    desc = {"layers": model.describe()}
    if model.class_names is not None:
        desc["classes"] = model.class_names
    arch = json.dumps(desc, sort_keys=True, separators=(",", ":")).encode()
    buf = bytearray(MODEL_MAGIC)
    buf += struct.pack("<I", MODEL_VERSION)
    buf += struct.pack("<I", len(arch)) + arch
    buf += struct.pack("<I", model.num_classes)
    buf += struct.pack("<I", len(model.input_shape))
    buf += struct.pack(f"<{len(model.input_shape)}I", *model.input_shape)
    for p in model.params:
        buf += np.ascontiguousarray(p, dtype="<f8").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    return bytes(buf)


def model_from_bytes(data):
    if len(data) < len(MODEL_MAGIC) + 8:
        raise ChecksumMismatch("model file truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("model file checksum does not match its contents")
    if body[:8] != MODEL_MAGIC:
        raise ChecksumMismatch("not a model file (bad magic)")
    pos = 8
    (version,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if version != MODEL_VERSION:
        raise VersionMismatch(f"model format version {version}, this build reads {MODEL_VERSION}")
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    arch = json.loads(body[pos:pos + n].decode())
    pos += n
    (n_cls,) = struct.unpack_from("<I", body, pos)
    pos += 4
    (ndim,) = struct.unpack_from("<I", body, pos)
    pos += 4
    shape = struct.unpack_from(f"<{ndim}I", body, pos)
    pos += 4 * ndim
    model = Model([layer_from_dict(d) for d in arch["layers"]], shape, arch.get("classes"))
    if model.num_classes != n_cls:
        raise ShapeMismatch("class count in header disagrees with architecture")
    for p in model.params:
        k = p.size * 8
        p[...] = np.frombuffer(body, dtype="<f8", count=p.size, offset=pos).reshape(p.shape)
        pos += k
    if pos != len(body):
        raise ChecksumMismatch("trailing bytes after weights")
    return model


def model_checksum(model):
    """Short content hash of the serialized model, used to tag report files."""
    return hashlib.sha256(model_to_bytes(model)).hexdigest()[:16]


def save_model(model, path):
    try:
        with open(path, "wb") as fh:
            fh.write(model_to_bytes(model))
    except OSError as exc:
        raise IoError(f"cannot write model to {path}: {exc}") from exc


def load_model(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read model from {path}: {exc}") from exc
    return model_from_bytes(data)
