import math

import numpy as np

from ..errors import InvalidSpec
from ..rng import make_rng
from .types import DIGITAL, IqSignal, WaveformSpec, normalize_power, random_symbols

RRC_SPAN = 8  # pulse truncated to +-8 symbols


def rrc_pulse(t, beta):
    """Root-raised-cosine impulse response at time ``t`` in symbol periods."""
    t = np.asarray(t, dtype=np.float64)
    if beta == 0:
        return np.sinc(t)
    out = np.empty_like(t)
    zero = np.isclose(t, 0.0, atol=1e-12)
    sing = np.isclose(np.abs(t), 1.0 / (4 * beta), atol=1e-12)
    reg = ~(zero | sing)
    tr = t[reg]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    out[reg] = num / den
    out[zero] = 1 - beta + 4 * beta / np.pi
    out[sing] = beta / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
                                     + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta)))
    return out


def gen_sc(spec: WaveformSpec) -> IqSignal:
    """RRC-shaped single-carrier PSK/QAM at ``bandwidth / (1 + rolloff)`` baud.

    Symbol ``k`` sits at time ``k * T``; the pulse train is evaluated directly
    on the output sample grid, so the samples-per-symbol need not be an integer.
    """
    if spec.modulation not in DIGITAL:
        raise InvalidSpec(f"{spec.modulation} is not a PSK/QAM modulation")
    fs = spec.sample_rate_hz
    beta = spec.rolloff
    baud = spec.occupied_bandwidth_hz / (1 + beta)
    sps = fs / baud
    n = spec.n_samples
    n_sym = int(math.ceil(n / sps)) + 2 * RRC_SPAN + 1
    rng = make_rng(spec.seed, "sc")
    sym = random_symbols(rng, spec.modulation, n_sym)
    # sample n sits at u symbols; leading RRC_SPAN symbols fill the filter memory
    u = np.arange(n) / sps + RRC_SPAN
    m = np.floor(u).astype(np.int64)
    x = np.zeros(n, dtype=np.complex128)
    for j in range(-RRC_SPAN, RRC_SPAN + 1):
        k = m + j
        ok = (k >= 0) & (k < n_sym)
        x[ok] += sym[k[ok]] * rrc_pulse(u[ok] - k[ok], beta)
    x = normalize_power(x)
    meta = {
        "generator": "sc",
        "seed": spec.seed,
        "params": spec.to_dict(),
        "occupied_bandwidth_hz": spec.occupied_bandwidth_hz,
        "symbol_rate_hz": baud,
        "samples_per_symbol": sps,
        "first_symbol": RRC_SPAN,
    }
    return IqSignal(x, fs, spec.class_id.value, meta)
