"""Sigmoid-threshold open-set decisions, threshold sweeps and threshold tuning."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyActivations, EmptySet, EmptyTable, InfeasibleConstraint, InvalidConfig

DEFAULT_THRESHOLD = 0.9999
DEFAULT_SWEEP_GRID = (0.0, 0.5, 0.9, 0.99, 0.999, 0.9999, 0.99999, 1.0)
UNKNOWN = -1  # class index used for the Unknown verdict in vectorized results
SWEEP_HEADER = ("threshold", "known_accuracy", "unknown_detection_rate")


def _check_threshold(t):
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidConfig(f"threshold must lie in [0, 1], got {t}")
    return t


@dataclass(frozen=True)
class ThresholdConfig:
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "threshold", _check_threshold(self.threshold))


@dataclass(frozen=True)
class Decision:
    """Known(class_index, confidence) when ``class_index`` is set, otherwise Unknown."""

    class_index: int | None
    confidence: float | None
    activations: np.ndarray
    threshold: float

    @property
    def is_unknown(self):
        return self.class_index is None

    def to_dict(self, class_names=None):
        d = {
            "verdict": "unknown" if self.is_unknown else "known",
            "class_index": self.class_index,
            "confidence": self.confidence,
            "threshold": self.threshold,
            "activations": [float(v) for v in self.activations],
        }
        if class_names is not None:
            d["class_name"] = None if self.is_unknown else class_names[self.class_index]
        return d


def decide(activations, threshold=DEFAULT_THRESHOLD) -> Decision:
    """Known(argmax) if the largest sigmoid value reaches ``threshold``, else Unknown."""
    s = np.asarray(activations, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptyActivations("decide needs at least one activation")
    t = _check_threshold(threshold)
    k = int(np.argmax(s))  # first maximum wins ties
    if s[k] >= t:
        return Decision(k, float(s[k]), s.copy(), t)
    return Decision(None, None, s.copy(), t)


def decide_batch(sig, threshold=DEFAULT_THRESHOLD):
    """Vectorized ``decide`` over rows; Unknown is encoded as ``UNKNOWN``."""
    sig = np.asarray(sig, dtype=np.float64)
    if sig.ndim != 2 or sig.shape[1] == 0:
        raise EmptyActivations("expected a (n, N) activation matrix with N >= 1")
    t = _check_threshold(threshold)
    k = np.argmax(sig, axis=1)
    top = sig[np.arange(len(sig)), k]
    return np.where(top >= t, k, UNKNOWN)


@dataclass
class SweepTable:
    thresholds: np.ndarray
    known_accuracy: np.ndarray
    unknown_detection_rate: np.ndarray

    def __len__(self):
        return len(self.thresholds)

    def rows(self):
        return list(zip(self.thresholds.tolist(), self.known_accuracy.tolist(),
                        self.unknown_detection_rate.tolist()))

    def is_monotone(self):
        """Known accuracy non-increasing, unknown detection non-decreasing."""
        return bool(np.all(np.diff(self.known_accuracy) <= 0)
                    and np.all(np.diff(self.unknown_detection_rate) >= 0))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in self.rows():
            w.writerow([f"{v:.6f}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != SWEEP_HEADER:
            raise InvalidConfig("not a threshold sweep CSV")
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, 3)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def _check_grid(thresholds):
    t = np.asarray([_check_threshold(v) for v in thresholds], dtype=np.float64)
    if t.size == 0:
        raise EmptyTable("threshold grid is empty")
    if np.any(np.diff(t) <= 0):
        raise InvalidConfig("thresholds must be strictly ascending")
    return t


def sweep_from_activations(known_sig, known_labels, unknown_sig, thresholds=DEFAULT_SWEEP_GRID):
    """Sweep table from precomputed sigmoid matrices.

    Each example's top activation is compared against every threshold, so an
    example's verdict can only flip from Known to Unknown as the threshold grows.
    """
    known_sig = np.asarray(known_sig, dtype=np.float64)
    unknown_sig = np.asarray(unknown_sig, dtype=np.float64)
    known_labels = np.asarray(known_labels, dtype=np.int64)
    if len(known_sig) == 0 or len(unknown_sig) == 0:
        raise EmptySet("sweep needs both known and unknown examples")
    t = _check_grid(thresholds)
    k_arg = np.argmax(known_sig, axis=1)
    k_top = known_sig[np.arange(len(known_sig)), k_arg]
    correct = k_arg == known_labels
    u_top = unknown_sig.max(axis=1)
    acc = np.array([np.mean(correct & (k_top >= v)) for v in t])
    det = np.array([np.mean(u_top < v) for v in t])
    return SweepTable(t, acc, det)


def sweep_threshold(model, known_x, known_labels, unknown_x, thresholds=DEFAULT_SWEEP_GRID):
    """Run the model once per example, then reuse the activations across thresholds."""
    if len(known_x) == 0 or len(unknown_x) == 0:
        raise EmptySet("sweep needs both known and unknown examples")
    _, ks = model.predict_batch(known_x)
    _, us = model.predict_batch(unknown_x)
    return sweep_from_activations(ks, known_labels, us, thresholds)


def tune_threshold(table: SweepTable, objective="balanced", floor=None):
    """Threshold maximizing the objective; ties go to the lower threshold.

    ``balanced`` maximizes the mean of the two rates. ``constrained``
    maximizes the unknown detection rate subject to known accuracy >= ``floor``.
    """
    if table is None or len(table) == 0:
        raise EmptyTable("cannot tune on an empty sweep table")
    if objective == "balanced":
        score = (table.known_accuracy + table.unknown_detection_rate) / 2
    elif objective == "constrained":
        if floor is None or not math.isfinite(float(floor)):
            raise InvalidConfig("constrained objective needs a finite accuracy floor")
        ok = table.known_accuracy >= float(floor)
        if not ok.any():
            raise InfeasibleConstraint(f"no threshold keeps known accuracy >= {floor}")
        score = np.where(ok, table.unknown_detection_rate, -np.inf)
    else:
        raise InvalidConfig(f"unknown objective {objective!r}")
    # argmax returns the first (lowest-threshold) maximum
    return float(table.thresholds[int(np.argmax(score))])
