"""OFDM and DFT-spread OFDM (SC-FDMA) synthesis on a resource grid."""

import math

import numpy as np
from scipy import signal as sps

from ..errors import InvalidSpec
from ..rng import make_rng
from .resample import resample_array
from .types import (
    DIGITAL,
    IqSignal,
    WaveformSpec,
    apply_bursts,
    burst_intervals,
    normalize_power,
    random_symbols,
)

RB_SIZE = 12  # subcarriers per resource block
SLOT_SYMBOLS = 7


def pilot_values(seed, shape):
    """Scrambled QPSK reference values, one per grid cell.

    A seeded pseudo-random sequence (a stand-in for a cell-ID scrambling code)
    so the references do not pile up into fixed spectral lines.
    """
    return random_symbols(make_rng(seed, "pilots"), "QPSK", shape)


def tx_lowpass(bw, scs, rate):
    """Band-edge filter, >= 60 dB down by 0.75 subcarrier outside the occupied band.

    Trims the sinc skirts of the outer subcarriers the way a transmit mask would.
    """
    numtaps, beta = sps.kaiserord(60.0, scs / (rate / 2))
    numtaps |= 1
    return sps.firwin(numtaps, (bw / 2 + 0.25 * scs) / (rate / 2), window=("kaiser", beta))


def ofdm_geometry(fs, scs, n_sc):
    """FFT size and native sample rate for a subcarrier spacing.

    Uses ``fs`` directly when ``fs / scs`` is an integer that fits the band,
    otherwise the smallest power-of-two FFT at ``nfft * scs`` (then resampled).
    """
    ratio = fs / scs
    if abs(ratio - round(ratio)) < 1e-9 and round(ratio) > n_sc:
        return int(round(ratio)), float(fs)
    nfft = 1 << max(1, math.ceil(math.log2(n_sc * 1.25)))
    return nfft, nfft * scs


def _allocation(rng, n_sym, n_sc, occupancy, traffic, contiguous):
    """Boolean (symbols x subcarriers) mask of data-bearing cells."""
    rb = RB_SIZE if n_sc >= 2 * RB_SIZE else 1
    n_rb = -(-n_sc // rb)
    n_slot = -(-n_sym // SLOT_SYMBOLS)
    blocks = np.zeros((n_slot, n_rb), dtype=bool)
    if traffic == "Bursty":
        # whole-band allocations in a few contiguous runs of slots
        n_on = max(1, int(round(occupancy * n_slot)))
        n_runs = min(n_on, int(rng.integers(1, 4)))
        cuts = np.sort(rng.choice(np.arange(1, n_on), size=n_runs - 1, replace=False)) if n_runs > 1 else []
        lengths = np.diff(np.concatenate(([0], cuts, [n_on]))).astype(int)
        free = n_slot - n_on
        gaps = np.sort(rng.integers(0, free + 1, size=n_runs))
        pos = 0
        prev_gap = 0
        for g, ln in zip(gaps, lengths):
            pos += g - prev_gap
            prev_gap = g
            blocks[pos:pos + ln, :] = True
            pos += ln
    elif contiguous:
        width = max(1, int(round(occupancy * n_rb)))
        starts = rng.integers(0, n_rb - width + 1, size=n_slot)
        for s, a in enumerate(starts):
            blocks[s, a:a + width] = True
    else:
        n_on = max(1, int(round(occupancy * n_slot * n_rb)))
        flat = np.zeros(n_slot * n_rb, dtype=bool)
        flat[rng.choice(n_slot * n_rb, size=n_on, replace=False)] = True
        blocks = flat.reshape(n_slot, n_rb)
    cells = np.repeat(np.repeat(blocks, SLOT_SYMBOLS, axis=0), rb, axis=1)
    return cells[:n_sym, :n_sc]


def _pilot_mask(n_sym, n_sc, spacing):
    mask = np.zeros((n_sym, n_sc), dtype=bool)
    if spacing is not None:
        every_sc, every_sym = spacing
        mask[::every_sym, ::every_sc] = True
    return mask


def resource_grid(spec: WaveformSpec, n_sym, spread):
    """Frequency-domain grid ``(n_sym, n_sc)`` plus the data-cell mask."""
    n_sc = spec.n_subcarriers
    rng = make_rng(spec.seed, "multicarrier")
    alloc = _allocation(rng, n_sym, n_sc, spec.occupancy, spec.traffic_model, spec.contiguous)
    # all data drawn up front so the grid content does not depend on `spread`
    data = random_symbols(rng, spec.modulation, (n_sym, n_sc))
    pilots = _pilot_mask(n_sym, n_sc, spec.pilot_spacing)
    cells = alloc & ~pilots
    grid = np.zeros((n_sym, n_sc), dtype=np.complex128)
    if spread:
        for t in range(n_sym):
            sel = np.flatnonzero(cells[t])
            if sel.size:
                grid[t, sel] = np.fft.fft(data[t, sel]) / np.sqrt(sel.size)
    else:
        grid[cells] = data[cells]
    grid[pilots] = pilot_values(spec.seed, grid.shape)[pilots]
    return grid, cells


def subcarrier_bins(n_sc, nfft):
    return (np.arange(n_sc) - n_sc // 2) % nfft


def _multicarrier(spec: WaveformSpec, spread):
    if spec.subcarrier_spacing_hz is None:
        raise InvalidSpec("multicarrier waveforms need a subcarrier spacing")
    if spec.modulation not in DIGITAL:
        raise InvalidSpec(f"{spec.modulation} is not a PSK/QAM modulation")
    fs = spec.sample_rate_hz
    n_sc = spec.n_subcarriers
    nfft, native = ofdm_geometry(fs, spec.subcarrier_spacing_hz, n_sc)
    if n_sc >= nfft:
        raise InvalidSpec("occupied subcarriers exceed the FFT size")
    cp = int(round(spec.cp_fraction * nfft))
    n_out = spec.n_samples
    n_native = int(math.ceil(n_out * native / fs)) + nfft + cp
    n_sym = -(-n_native // (nfft + cp))

    grid, _ = resource_grid(spec, n_sym, spread)
    freq = np.zeros((n_sym, nfft), dtype=np.complex128)
    freq[:, subcarrier_bins(n_sc, nfft)] = grid
    body = np.fft.ifft(freq, axis=1) * np.sqrt(nfft)
    x = np.concatenate([body[:, nfft - cp:], body], axis=1).ravel()[:n_native]
    if spec.tx_filter:
        h = tx_lowpass(n_sc * spec.subcarrier_spacing_hz, spec.subcarrier_spacing_hz, native)
        x = sps.fftconvolve(x, h, mode="same")
    if native != fs:
        x = resample_array(x, native, fs)
    x = x[:n_out]

    meta = {
        "generator": "scfdma" if spread else "ofdm",
        "seed": spec.seed,
        "params": spec.to_dict(),
        "occupied_bandwidth_hz": n_sc * spec.subcarrier_spacing_hz,
        "nfft": nfft,
        "cp_len": cp,
        "native_rate_hz": native,
    }
    if spec.bursts is not None:
        intervals = burst_intervals(make_rng(spec.seed, "bursts"), n_out, fs, *spec.bursts)
        x, mask = apply_bursts(x, intervals)
        x = normalize_power(x, mask)
        meta["bursts"] = intervals
    else:
        x = normalize_power(x)
    return IqSignal(x, fs, spec.class_id.value, meta)


def gen_ofdm(spec: WaveformSpec) -> IqSignal:
    """CP-OFDM: random constellation symbols on the allocated subcarriers."""
    return _multicarrier(spec, spread=False)


def gen_scfdma(spec: WaveformSpec, spreading=True) -> IqSignal:
    """DFT-spread OFDM; with ``spreading=False`` it is exactly ``gen_ofdm``."""
    return _multicarrier(spec, spread=spreading)
