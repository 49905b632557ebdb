from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from ..errors import AliasingRisk
from .types import IqSignal

_HALF_TAPS = 64  # filter half-length per output phase
_KAISER_BETA = 14.0  # ~140 dB stopband


def rational_ratio(src_hz, dst_hz, max_den=2000):
    r = Fraction(dst_hz / src_hz).limit_denominator(max_den)
    return r.numerator, r.denominator


@lru_cache(maxsize=32)
def _lowpass(up, down):
    m = max(up, down)
    h = sps.firwin(2 * _HALF_TAPS * m + 1, 1.0 / m, window=("kaiser", _KAISER_BETA))
    h.setflags(write=False)
    return h


def resample_array(x, src_hz, dst_hz):
    up, down = rational_ratio(src_hz, dst_hz)
    if up == down:
        return np.array(x, copy=True)
    # resample_poly applies the x`up` gain itself
    return sps.resample_poly(x, up, down, window=np.array(_lowpass(up, down)))


def resample(signal: IqSignal, target_rate_hz):
    """Polyphase rational resampling to ``target_rate_hz``."""
    src = signal.sample_rate_hz
    bw = signal.meta.get("occupied_bandwidth_hz")
    if bw is not None and target_rate_hz < bw:
        raise AliasingRisk(f"target rate {target_rate_hz} Hz is below occupied bandwidth {bw} Hz")
    if target_rate_hz == src:
        return IqSignal(signal.samples.copy(), src, signal.class_label, dict(signal.meta))
    y = resample_array(signal.samples, src, target_rate_hz)
    meta = dict(signal.meta)
    meta.pop("bursts", None)
    return IqSignal(y, float(target_rate_hz), signal.class_label, meta)
