import numpy as np

from ..errors import InvalidSpec
from ..rng import make_rng
from .types import IqSignal, WaveformSpec, apply_bursts, burst_intervals

GAUSS_SPAN_BITS = 2


def gaussian_taps(bt, sps):
    """Unit-DC-gain Gaussian pulse-shaping filter sampled at ``sps`` per bit."""
    sigma = np.sqrt(np.log(2)) / (2 * np.pi * bt)  # in bit periods
    half = int(np.ceil(GAUSS_SPAN_BITS * sps))
    t = np.arange(-half, half + 1) / sps
    h = np.exp(-0.5 * (t / sigma) ** 2)
    return h / h.sum()


def gen_gfsk(spec: WaveformSpec, bits=None) -> IqSignal:
    """Continuous-phase GFSK; bit rate is half the occupied bandwidth.

    Bit 1 maps to ``+h * bitrate / 2`` frequency deviation, bit 0 to the
    negative. ``bits`` overrides the random payload (cycled if short).
    """
    if spec.modulation != "GFSK":
        raise InvalidSpec("gen_gfsk needs modulation GFSK")
    if not spec.mod_index > 0 or not spec.bt > 0:
        raise InvalidSpec("modulation index and BT must be positive")
    fs = spec.sample_rate_hz
    bitrate = spec.occupied_bandwidth_hz / 2
    sps = fs / bitrate
    n = spec.n_samples
    n_bits = int(np.ceil(n / sps)) + 1
    rng = make_rng(spec.seed, "gfsk")
    if bits is None:
        bits = rng.integers(0, 2, size=n_bits)
    else:
        bits = np.resize(np.asarray(bits, dtype=np.int64), n_bits)
    nrz = 2.0 * bits[(np.arange(n) / sps).astype(np.int64)] - 1.0
    h = gaussian_taps(spec.bt, sps)
    half = h.size // 2
    padded = np.pad(nrz, half, mode="edge")
    shaped = np.convolve(padded, h, mode="valid")
    freq = spec.mod_index * bitrate / 2 * shaped
    phase = 2 * np.pi * np.cumsum(freq) / fs
    x = np.exp(1j * phase)
    meta = {
        "generator": "gfsk",
        "seed": spec.seed,
        "params": spec.to_dict(),
        "occupied_bandwidth_hz": spec.occupied_bandwidth_hz,
        "bitrate_hz": bitrate,
    }
    if spec.traffic_model == "Bursty" and spec.bursts is not None:
        intervals = burst_intervals(make_rng(spec.seed, "bursts"), n, fs, *spec.bursts)
        x, _ = apply_bursts(x, intervals)
        meta["bursts"] = intervals
    return IqSignal(x, fs, spec.class_id.value, meta)
