"""Signal container, waveform parameters and constellations."""

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from ..errors import InvalidSpec

DESK_RATE_HZ = 3.84e6
PAPER_RATE_HZ = 125e6


class ClassId(str, Enum):
    LTE_DL = "LteDl"
    NR_DL = "NrDl"
    LTE_UL = "LteUl"
    NR_UL = "NrUl"
    WIFI6 = "Wifi6"
    BLE = "Ble"
    NB_IOT = "NbIot"
    GENERIC_OFDM = "GenericOfdm"
    GENERIC_SCFDMA = "GenericScFdma"
    GENERIC_SC = "GenericSc"
    AM = "Am"
    FM = "Fm"

    def __str__(self):
        return self.value


KNOWN_CLASSES = (ClassId.LTE_DL, ClassId.NR_DL, ClassId.LTE_UL, ClassId.NR_UL,
                 ClassId.WIFI6, ClassId.BLE, ClassId.NB_IOT)
UNKNOWN_CLASSES = (ClassId.GENERIC_OFDM, ClassId.GENERIC_SCFDMA, ClassId.GENERIC_SC,
                   ClassId.AM, ClassId.FM)

MODULATIONS = ("BPSK", "QPSK", "16PSK", "64PSK", "16QAM", "64QAM", "256QAM",
               "GFSK", "AM-DSB", "AM-SSB", "FM")
DIGITAL = MODULATIONS[:7]


@dataclass
class IqSignal:
    samples: np.ndarray
    sample_rate_hz: float
    class_label: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InvalidSpec("signal must be a non-empty 1-D sample sequence")
        if not self.sample_rate_hz > 0:
            raise InvalidSpec("sample_rate_hz must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    def mean_power(self):
        return float(np.mean(np.abs(self.samples) ** 2))

    def on_burst_mask(self):
        """Samples inside transmission bursts (all of them for continuous signals)."""
        bursts = self.meta.get("bursts")
        if bursts is None:
            return np.ones(self.samples.size, dtype=bool)
        mask = np.zeros(self.samples.size, dtype=bool)
        for a, b in bursts:
            mask[a:b] = True
        return mask

    def replace(self, samples, **meta_updates):
        meta = dict(self.meta)
        meta.update(meta_updates)
        return IqSignal(samples, self.sample_rate_hz, self.class_label, meta)


@dataclass(frozen=True)
class WaveformSpec:
    class_id: ClassId
    occupied_bandwidth_hz: float
    modulation: str
    duration_s: float
    seed: int
    sample_rate_hz: float = DESK_RATE_HZ
    subcarrier_spacing_hz: float | None = None
    occupancy: float = 1.0
    traffic_model: str = "Uniform"
    # multicarrier
    cp_fraction: float = 0.07
    pilot_spacing: tuple | None = None  # (every k subcarriers, every t symbols)
    contiguous: bool = False
    tx_filter: bool = False
    # time-domain packet gating: ((on_min_s, on_max_s), (gap_min_s, gap_max_s))
    bursts: tuple | None = None
    # single carrier
    rolloff: float = 0.35
    # gfsk
    mod_index: float = 0.5
    bt: float = 0.5
    # analog
    mod_depth: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "class_id", ClassId(self.class_id))
        if self.modulation not in MODULATIONS:
            raise InvalidSpec(f"unknown modulation {self.modulation!r}")
        if not self.sample_rate_hz > 0 or not self.duration_s > 0:
            raise InvalidSpec("sample rate and duration must be positive")
        if not 0 < self.occupied_bandwidth_hz < self.sample_rate_hz:
            raise InvalidSpec("occupied bandwidth must lie in (0, sample_rate)")
        if not 0 < self.occupancy <= 1:
            raise InvalidSpec("occupancy must lie in (0, 1]")
        if self.traffic_model not in ("Uniform", "Bursty"):
            raise InvalidSpec("traffic_model must be Uniform or Bursty")
        if self.subcarrier_spacing_hz is not None:
            if not self.subcarrier_spacing_hz > 0:
                raise InvalidSpec("subcarrier spacing must be positive")
            if self.n_subcarriers < 2:
                raise InvalidSpec("need at least 2 subcarriers in the occupied band")
        if not 0 <= self.cp_fraction < 1:
            raise InvalidSpec("cp_fraction must lie in [0, 1)")
        if not 0 <= self.rolloff <= 1:
            raise InvalidSpec("rolloff must lie in [0, 1]")

    @property
    def n_subcarriers(self):
        return int(round(self.occupied_bandwidth_hz / self.subcarrier_spacing_hz))

    @property
    def n_samples(self):
        return int(math.ceil(self.duration_s * self.sample_rate_hz - 1e-9))

    def to_dict(self):
        d = asdict(self)
        d["class_id"] = self.class_id.value
        return d


def constellation(name):
    """Unit-average-power constellation points for a PSK/QAM name."""
    if name == "BPSK":
        return np.array([1.0 + 0j, -1.0 + 0j])
    if name.endswith("PSK"):
        m = 4 if name == "QPSK" else int(name[:-3])
        return np.exp(1j * (2 * np.pi * np.arange(m) / m + (np.pi / 4 if m == 4 else 0.0)))
    if name.endswith("QAM"):
        m = int(name[:-3])
        side = int(round(math.sqrt(m)))
        lv = np.arange(side) * 2.0 - (side - 1)
        pts = (lv[:, None] + 1j * lv[None, :]).ravel()
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    raise InvalidSpec(f"{name} is not a PSK/QAM constellation")


def random_symbols(rng, name, size):
    pts = constellation(name)
    return pts[rng.integers(0, pts.size, size=size)]


def normalize_power(x, mask=None):
    """Scale so mean |x|^2 over ``mask`` (or everywhere) is 1."""
    ref = x if mask is None else x[mask]
    p = np.mean(np.abs(ref) ** 2) if ref.size else 0.0
    if not p > 0:
        raise InvalidSpec("generated signal has zero power")
    return x / np.sqrt(p)


def burst_intervals(rng, n, fs, on_range_s, gap_range_s):
    """Alternating packet/gap schedule covering ``n`` samples, random phase at start."""
    intervals = []
    # start somewhere inside a packet+gap cycle so slices are not time-aligned
    pos = -int(rng.uniform(0, on_range_s[1] + gap_range_s[1]) * fs)
    while pos < n:
        on = max(1, int(rng.uniform(*on_range_s) * fs))
        gap = max(1, int(rng.uniform(*gap_range_s) * fs))
        a, b = max(pos, 0), min(pos + on, n)
        if b > a:
            intervals.append((a, b))
        pos += on + gap
    if not intervals:
        intervals.append((0, min(n, max(1, int(on_range_s[0] * fs)))))
    return intervals


def apply_bursts(x, intervals):
    mask = np.zeros(x.size, dtype=bool)
    for a, b in intervals:
        mask[a:b] = True
    out = np.where(mask, x, 0)
    return out, mask
