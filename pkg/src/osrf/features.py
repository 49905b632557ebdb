"""Bootstrap slicing and the STFT -> magnitude -> min-max preprocessing chain."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, LengthMismatch, SignalTooShort
from .rng import make_rng
from .waveform.types import IqSignal


@dataclass(frozen=True)
class SliceConfig:
    """Slice geometry; ``slice_len`` must equal ``n_segments * fft_len``."""

    slice_len: int = 8192
    n_slices_per_signal: int = 10
    fft_len: int = 4096
    n_segments: int = 2

    def __post_init__(self):
        for name in ("slice_len", "n_slices_per_signal", "fft_len", "n_segments"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.slice_len != self.n_segments * self.fft_len:
            raise InvalidConfig(
                f"slice_len {self.slice_len} != n_segments {self.n_segments} x fft_len {self.fft_len}")

    @property
    def feature_shape(self):
        return (self.n_segments, self.fft_len)


@dataclass
class FeatureTensor:
    values: np.ndarray  # (n_segments, fft_len), every entry in [0, 1]
    source_meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def flat(self):
        return self.values.ravel()


def _shift_bursts(bursts, start, length):
    out = []
    for a, b in bursts:
        a, b = max(a - start, 0), min(b - start, length)
        if b > a:
            out.append((a, b))
    return out


def bootstrap_slices(signal: IqSignal, cfg: SliceConfig, seed) -> list:
    """``cfg.n_slices_per_signal`` windows at independent uniform offsets (with replacement)."""
    n = signal.samples.size
    if n < cfg.slice_len:
        raise SignalTooShort(f"signal has {n} samples, slices need {cfg.slice_len}")
    rng = make_rng(seed, "slices")
    offsets = rng.integers(0, n - cfg.slice_len + 1, size=cfg.n_slices_per_signal)
    out = []
    for off in offsets:
        off = int(off)
        meta = {"slice_offset": off}
        if signal.meta.get("bursts") is not None:
            meta["bursts"] = _shift_bursts(signal.meta["bursts"], off, cfg.slice_len)
        out.append(signal.replace(signal.samples[off:off + cfg.slice_len].copy(), **meta))
    return out


def stft(slice_, cfg: SliceConfig):
    """Rows are DC-centred DFTs of consecutive rectangular, non-overlapping segments."""
    x = slice_.samples if isinstance(slice_, IqSignal) else np.asarray(slice_)
    if x.ndim != 1 or x.size != cfg.slice_len:
        raise LengthMismatch(f"expected a 1-D slice of {cfg.slice_len} samples, got shape {x.shape}")
    segs = x.reshape(cfg.n_segments, cfg.fft_len)
    return np.fft.fftshift(np.fft.fft(segs, axis=1), axes=1)


def magnitude(m):
    return np.abs(m)


def normalize_01(m):
    """Global min-max scaling; a constant matrix maps to zeros."""
    m = np.asarray(m, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if not hi > lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def preprocess(slice_: IqSignal, cfg: SliceConfig) -> FeatureTensor:
    values = normalize_01(magnitude(stft(slice_, cfg)))
    meta = {}
    if isinstance(slice_, IqSignal):
        meta = {"label": slice_.class_label}
        for key in ("impairments", "slice_offset", "class_seed"):
            if key in slice_.meta:
                meta[key] = slice_.meta[key]
    return FeatureTensor(values, meta)
