import numpy as np
from scipy.signal import hilbert

from ..errors import InvalidSpec
from ..rng import make_rng
from .types import IqSignal, WaveformSpec, normalize_power

MESSAGE_BW_FRACTION = 0.1
FM_DEVIATION_FRACTION = 0.4  # Carson: 2 * (0.4 + 0.1) * B = B


def message(n, fs, cutoff_hz, rng):
    """Seeded Gaussian noise, brick-wall low-passed, scaled to peak |m| = 1."""
    spec = np.fft.rfft(rng.standard_normal(n))
    spec[np.fft.rfftfreq(n, 1.0 / fs) > cutoff_hz] = 0.0
    m = np.fft.irfft(spec, n)
    peak = np.max(np.abs(m))
    return m / peak if peak > 0 else m


def gen_analog(spec: WaveformSpec) -> IqSignal:
    """AM (double or upper single sideband, with carrier) and FM at baseband."""
    if spec.modulation not in ("AM-DSB", "AM-SSB", "FM"):
        raise InvalidSpec(f"{spec.modulation} is not an analog modulation")
    if not 0 <= spec.mod_depth <= 1:
        raise InvalidSpec("modulation depth must lie in [0, 1]")
    fs, n = spec.sample_rate_hz, spec.n_samples
    bw = spec.occupied_bandwidth_hz
    msg = message(n, fs, MESSAGE_BW_FRACTION * bw, make_rng(spec.seed, "message"))
    meta = {
        "generator": "analog",
        "seed": spec.seed,
        "params": spec.to_dict(),
        "occupied_bandwidth_hz": bw,
        "message_bandwidth_hz": MESSAGE_BW_FRACTION * bw,
    }
    if spec.modulation == "AM-DSB":
        x = (1.0 + spec.mod_depth * msg).astype(np.complex128)
    elif spec.modulation == "AM-SSB":
        # analytic message keeps only the upper sideband
        x = 1.0 + spec.mod_depth * hilbert(msg)
    else:
        dev = FM_DEVIATION_FRACTION * bw
        x = np.exp(2j * np.pi * dev * np.cumsum(msg) / fs)
        meta["deviation_hz"] = dev
        return IqSignal(x, fs, spec.class_id.value, meta)
    return IqSignal(normalize_power(x), fs, spec.class_id.value, meta)
