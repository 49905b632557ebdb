"""Impairment chain: multipath fading, I/Q imbalance, frequency offset, AWGN.

``augment`` applies the four stages in that fixed order. Each stage is also a
standalone pure function of its inputs and seed.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidConfig, InvalidProfile, OffsetOutOfRange, ZeroPowerSignal
from .rng import derive_seed, make_rng
from .waveform.types import IqSignal

N_SINUSOIDS = 16
DEFAULT_DELAYS_S = (0.0, 0.5e-6, 1.2e-6)
DEFAULT_GAINS_DB = (0.0, -3.0, -6.0)
DEFAULT_DOPPLER_HZ = 50.0
DEFAULT_K_DB = 10.0
NO_NOISE = math.inf

# bursty-signal SNR reference: samples whose short-time power exceeds this
# fraction of the peak short-time power count as "on"
GATE_FRACTION = 0.01
GATE_WINDOW = 32


class Fading(str, Enum):
    NONE = "None"
    RAYLEIGH = "Rayleigh"
    RICIAN = "Rician"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ChannelProfile:
    fading: Fading = Fading.NONE
    k_factor_db: float | None = None
    path_delays_s: tuple = DEFAULT_DELAYS_S
    path_gains_db: tuple = DEFAULT_GAINS_DB
    max_doppler_hz: float = DEFAULT_DOPPLER_HZ
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "fading", Fading(self.fading))
        except ValueError as exc:
            raise InvalidProfile(str(exc)) from None
        d = tuple(float(v) for v in self.path_delays_s)
        g = tuple(float(v) for v in self.path_gains_db)
        object.__setattr__(self, "path_delays_s", d)
        object.__setattr__(self, "path_gains_db", g)
        if not d or len(d) != len(g):
            raise InvalidProfile("need one gain per path delay and at least one path")
        if d[0] != 0.0 or any(b < a for a, b in zip(d, d[1:])):
            raise InvalidProfile("path delays must start at 0 and be ascending")
        if not all(math.isfinite(v) for v in d + g):
            raise InvalidProfile("path delays and gains must be finite")
        if not (math.isfinite(self.max_doppler_hz) and self.max_doppler_hz >= 0):
            raise InvalidProfile("max_doppler_hz must be finite and non-negative")
        if self.fading is Fading.RICIAN:
            if self.k_factor_db is None or not math.isfinite(self.k_factor_db):
                raise InvalidProfile("Rician fading needs a finite k_factor_db")

    @property
    def linear_gains(self):
        """Path powers normalized so they sum to one."""
        p = 10.0 ** (np.asarray(self.path_gains_db) / 10.0)
        return p / p.sum()

    def to_dict(self):
        return {
            "fading": self.fading.value,
            "k_factor_db": self.k_factor_db,
            "path_delays_s": list(self.path_delays_s),
            "path_gains_db": list(self.path_gains_db),
            "max_doppler_hz": self.max_doppler_hz,
            "seed": int(self.seed),
        }


def _interval(name, r):
    lo, hi = (float(v) for v in r)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise InvalidConfig(f"{name} must be a finite closed interval lo <= hi, got {r!r}")
    return lo, hi


@dataclass(frozen=True)
class ImpairmentConfig:
    """Ranges for the random impairment draws.

    ``snr_db`` is either a fixed value (``NO_NOISE`` disables AWGN) or a
    ``(lo, hi)`` interval drawn uniformly per call. ``profile=None`` draws a
    Rayleigh or Rician profile (50/50) from ``seed``.
    """

    iq_gain_db_range: tuple = (-3.0, 3.0)
    freq_offset_hz_range: tuple = (-2500.0, 2500.0)
    snr_db: float | tuple = (-10.0, 20.0)
    profile: ChannelProfile | None = None
    seed: int = 0
    fading_choices: tuple = field(default=(Fading.RAYLEIGH, Fading.RICIAN))

    def __post_init__(self):
        object.__setattr__(self, "iq_gain_db_range", _interval("iq_gain_db_range", self.iq_gain_db_range))
        object.__setattr__(self, "freq_offset_hz_range",
                           _interval("freq_offset_hz_range", self.freq_offset_hz_range))
        if isinstance(self.snr_db, (tuple, list)):
            object.__setattr__(self, "snr_db", _interval("snr_db", self.snr_db))
        elif math.isnan(float(self.snr_db)) or float(self.snr_db) == -math.inf:
            raise InvalidConfig("snr_db must be a number, +inf, or an interval")
        object.__setattr__(self, "fading_choices", tuple(Fading(f) for f in self.fading_choices))
        if not self.fading_choices:
            raise InvalidConfig("fading_choices must not be empty")

    @classmethod
    def identity(cls):
        """Every stage degenerates to a no-op."""
        return cls((0.0, 0.0), (0.0, 0.0), NO_NOISE, ChannelProfile(Fading.NONE))


def draw_profile(seed, choices=(Fading.RAYLEIGH, Fading.RICIAN)):
    """Default-geometry profile with the fading type drawn uniformly from ``choices``."""
    rng = make_rng(seed, "profile")
    fading = Fading(choices[int(rng.integers(len(choices)))])
    k = DEFAULT_K_DB if fading is Fading.RICIAN else None
    return ChannelProfile(fading, k, seed=derive_seed(seed, "taps"))


def tap_gains(profile: ChannelProfile, n, sample_rate_hz):
    """Unit-power complex gain processes, shape ``(n_paths, n)``.

    Each path is a sum of ``N_SINUSOIDS`` Doppler-shifted phasors with
    independent complex Gaussian weights, so every sample is exactly
    CN(0, 1) while successive samples decorrelate at the Doppler rate.
    Rician adds a fixed-power line-of-sight phasor to path 0.
    """
    rng = make_rng(profile.seed, "sos")
    n_paths = len(profile.path_delays_s)
    t = np.arange(n) / sample_rate_hz
    w = (rng.standard_normal((n_paths, N_SINUSOIDS))
         + 1j * rng.standard_normal((n_paths, N_SINUSOIDS))) / math.sqrt(2 * N_SINUSOIDS)
    aoa = rng.uniform(0, 2 * np.pi, (n_paths, N_SINUSOIDS))
    fd = profile.max_doppler_hz * np.cos(aoa)
    g = np.empty((n_paths, n), dtype=np.complex128)
    for p in range(n_paths):
        g[p] = np.exp(2j * np.pi * np.outer(t, fd[p])) @ w[p]
    if profile.fading is Fading.RICIAN:
        k = 10.0 ** (profile.k_factor_db / 10.0)
        theta, phi = rng.uniform(0, 2 * np.pi, 2)
        los = np.exp(1j * (2 * np.pi * profile.max_doppler_hz * math.cos(theta) * t + phi))
        g[0] = math.sqrt(k / (k + 1)) * los + math.sqrt(1 / (k + 1)) * g[0]
    return g


def apply_fading(signal: IqSignal, profile: ChannelProfile) -> IqSignal:
    """Time-varying tapped delay line; delays are rounded to whole samples."""
    if not isinstance(profile, ChannelProfile):
        raise InvalidProfile("profile must be a ChannelProfile")
    if profile.fading is Fading.NONE:
        return signal.replace(signal.samples.copy())
    x = signal.samples
    n = x.size
    fs = signal.sample_rate_hz
    g = tap_gains(profile, n, fs)
    amp = np.sqrt(profile.linear_gains)
    y = np.zeros(n, dtype=np.complex128)
    for p, delay in enumerate(profile.path_delays_s):
        d = int(round(delay * fs))
        if d >= n:
            continue
        y[d:] += amp[p] * g[p, d:] * x[:n - d]
    return signal.replace(y)


def apply_iq_imbalance(signal: IqSignal, gain_db) -> IqSignal:
    """Scale the in-phase (real) part by ``10**(gain_db/20)``."""
    gain_db = float(gain_db)
    if not math.isfinite(gain_db):
        raise InvalidConfig("gain_db must be finite")
    x = signal.samples
    return signal.replace(x.real * 10.0 ** (gain_db / 20.0) + 1j * x.imag)


def apply_freq_offset(signal: IqSignal, offset_hz) -> IqSignal:
    offset_hz = float(offset_hz)
    fs = signal.sample_rate_hz
    if not abs(offset_hz) < fs / 2:
        raise OffsetOutOfRange(f"|{offset_hz}| Hz is not below half the sample rate {fs / 2} Hz")
    n = np.arange(signal.samples.size)
    return signal.replace(signal.samples * np.exp(2j * np.pi * offset_hz * n / fs))


def reference_power(x):
    """Mean power over "on" samples.

    A sample is on when the short-time power around it (``GATE_WINDOW``-sample
    moving average) exceeds ``GATE_FRACTION`` of the peak short-time power.
    Smoothing keeps the deep dips inside an OFDM or AM burst from being
    mistaken for gaps between bursts.
    """
    p = np.abs(x) ** 2
    w = min(GATE_WINDOW, p.size)
    smooth = np.convolve(p, np.ones(w) / w, mode="same")
    peak = smooth.max()
    if not peak > 0:
        return 0.0
    on = smooth > GATE_FRACTION * peak
    return float(p[on].mean())


def apply_awgn(signal: IqSignal, snr_db, seed) -> IqSignal:
    """Add CN(0, P/10**(snr/10)) noise; ``snr_db = inf`` is the identity."""
    snr_db = float(snr_db)
    ref = reference_power(signal.samples)
    if not ref > 0 or not math.isfinite(ref):
        raise ZeroPowerSignal("cannot set an SNR relative to a zero-power signal")
    if snr_db == math.inf:
        return signal.replace(signal.samples.copy())
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise InvalidConfig("snr_db must be finite or +inf")
    var = ref / 10.0 ** (snr_db / 10.0)
    rng = make_rng(seed, "awgn")
    n = signal.samples.size
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(var / 2)
    return signal.replace(signal.samples + noise)


def _draw(rng, lo_hi):
    lo, hi = lo_hi
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def augment(signal: IqSignal, config: ImpairmentConfig) -> IqSignal:
    """fading -> I/Q imbalance -> frequency offset -> AWGN, with draws recorded in meta."""
    rng = make_rng(config.seed, "augment")
    gain_db = _draw(rng, config.iq_gain_db_range)
    offset_hz = _draw(rng, config.freq_offset_hz_range)
    snr = _draw(rng, config.snr_db) if isinstance(config.snr_db, tuple) else float(config.snr_db)
    profile = config.profile
    if profile is None:
        profile = draw_profile(derive_seed(config.seed, "channel"), config.fading_choices)
    # stages looked up as module globals so the call order can be audited
    out = apply_fading(signal, profile)
    out = apply_iq_imbalance(out, gain_db)
    out = apply_freq_offset(out, offset_hz)
    out = apply_awgn(out, snr, derive_seed(config.seed, "noise"))
    out.meta["impairments"] = {
        "fading": profile.fading.value,
        "k_factor_db": profile.k_factor_db,
        "channel_seed": int(profile.seed),
        "gain_db": gain_db,
        "offset_hz": offset_hz,
        "snr_db": snr,
        "seed": int(config.seed),
    }
    return out
