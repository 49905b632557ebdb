"""Parametric stand-ins for each signal class.

Bandwidths below are quoted at the 3.84 MHz desk rate and scale linearly with
the requested sample rate; subcarrier spacings and burst timings do not scale.
"""

from dataclasses import dataclass

from ..errors import InvalidSpec
from ..rng import derive_seed, make_rng
from .analog import gen_analog
from .gfsk import gen_gfsk
from .multicarrier import gen_ofdm, gen_scfdma
from .single_carrier import gen_sc
from .types import DESK_RATE_HZ, KNOWN_CLASSES, UNKNOWN_CLASSES, ClassId, WaveformSpec

UNKNOWN_DIGITAL_MODS = ("QPSK", "16PSK", "64PSK", "16QAM", "64QAM", "256QAM")


@dataclass(frozen=True)
class Family:
    generator: str  # ofdm | scfdma | ofdm/scfdma | sc | gfsk | analog
    bandwidths_hz: tuple  # discrete choices, or a (lo, hi) range when bw_range
    modulations: tuple
    scs_hz: tuple = ()
    bw_range: bool = False
    cp_fraction: tuple = (0.07,)
    pilot_spacing: tuple | None = None
    contiguous: bool = False
    traffic: tuple = ("Uniform", "Bursty")
    occupancy: tuple = (0.01, 1.0)
    bursts: tuple | None = None
    envelope_constant: bool = False
    rolloff: tuple = (0.35, 0.35)
    mod_depth: tuple = (0.8, 0.8)

    @property
    def duty_cycle(self):
        return "bursty" if self.bursts is not None else "continuous"


_HALF_NYQ = DESK_RATE_HZ / 2

FAMILIES = {
    ClassId.LTE_DL: Family(
        "ofdm", (0.5e6, 1.0e6, 1.5e6), ("QPSK", "16QAM", "64QAM"), scs_hz=(15e3,),
        pilot_spacing=(6, 7)),
    ClassId.NR_DL: Family(
        "ofdm", (0.8e6, 1.2e6, 0.8 * _HALF_NYQ), ("QPSK", "16QAM", "64QAM", "256QAM"),
        scs_hz=(15e3, 30e3), pilot_spacing=(4, 14)),
    # localized allocation with a full reference symbol per slot
    ClassId.LTE_UL: Family(
        "scfdma", (0.36e6, 0.72e6, 1.08e6, 1.44e6), ("QPSK", "16QAM", "64QAM"),
        scs_hz=(15e3,), pilot_spacing=(1, 7), contiguous=True),
    ClassId.NR_UL: Family(
        "ofdm/scfdma", (0.6e6, 0.9e6, 1.35e6), ("BPSK", "QPSK", "16QAM", "64QAM"),
        scs_hz=(15e3, 30e3), pilot_spacing=(2, 14), contiguous=True),
    ClassId.WIFI6: Family(
        "ofdm", (1.25e6, 2.5e6), ("BPSK", "QPSK", "16QAM", "64QAM", "256QAM"),
        scs_hz=(78.125e3,), cp_fraction=(0.0625, 0.125, 0.25), pilot_spacing=(8, 1),
        traffic=("Uniform",), occupancy=(1.0, 1.0),
        bursts=((0.2e-3, 2.0e-3), (10e-6, 500e-6))),
    ClassId.BLE: Family(
        "gfsk", (1.92e6,), ("GFSK",), traffic=("Bursty",),
        bursts=((0.3e-3, 2.1e-3), (0.15e-3, 1.0e-3)), envelope_constant=True),
    ClassId.NB_IOT: Family(
        "ofdm", (0.18e6,), ("QPSK",), scs_hz=(15e3,), pilot_spacing=(6, 7),
        traffic=("Uniform",), occupancy=(1.0, 1.0)),
    ClassId.GENERIC_OFDM: Family(
        "ofdm", (0.2 * _HALF_NYQ, 0.8 * _HALF_NYQ), UNKNOWN_DIGITAL_MODS, bw_range=True,
        scs_hz=(15e3, 30e3, 60e3), traffic=("Uniform",), occupancy=(1.0, 1.0)),
    ClassId.GENERIC_SCFDMA: Family(
        "scfdma", (0.2 * _HALF_NYQ, 0.8 * _HALF_NYQ), UNKNOWN_DIGITAL_MODS, bw_range=True,
        scs_hz=(15e3, 30e3, 60e3), traffic=("Uniform",), occupancy=(1.0, 1.0)),
    ClassId.GENERIC_SC: Family(
        "sc", (0.2 * _HALF_NYQ, 0.8 * _HALF_NYQ), UNKNOWN_DIGITAL_MODS, bw_range=True,
        traffic=("Uniform",), rolloff=(0.1, 0.5)),
    ClassId.AM: Family(
        "analog", (20e3, 200e3), ("AM-DSB", "AM-SSB"), bw_range=True,
        traffic=("Uniform",), mod_depth=(0.3, 1.0)),
    ClassId.FM: Family(
        "analog", (50e3, 400e3), ("FM",), bw_range=True, traffic=("Uniform",),
        envelope_constant=True),
}

_GENERATORS = {
    "ofdm": gen_ofdm,
    "scfdma": gen_scfdma,
    "sc": gen_sc,
    "gfsk": gen_gfsk,
    "analog": gen_analog,
}


def draw_spec(class_id, duration_s, seed, sample_rate_hz=DESK_RATE_HZ):
    """Draw one ``WaveformSpec`` uniformly from the class's parameter family."""
    class_id = ClassId(class_id)
    fam = FAMILIES[class_id]
    rng = make_rng(seed, "family", class_id.value)
    scale = sample_rate_hz / DESK_RATE_HZ
    if fam.bw_range:
        bw = float(rng.uniform(*fam.bandwidths_hz)) * scale
    else:
        bw = float(fam.bandwidths_hz[rng.integers(len(fam.bandwidths_hz))]) * scale
    scs = float(fam.scs_hz[rng.integers(len(fam.scs_hz))]) if fam.scs_hz else None
    if scs is not None:
        # snap to a whole number of subcarriers
        bw = max(2, round(bw / scs)) * scs
    gen = fam.generator
    if gen == "ofdm/scfdma":
        gen = "scfdma" if rng.random() < 0.5 else "ofdm"
    lo, hi = fam.occupancy
    return gen, WaveformSpec(
        class_id=class_id,
        occupied_bandwidth_hz=bw,
        modulation=str(fam.modulations[rng.integers(len(fam.modulations))]),
        duration_s=duration_s,
        seed=derive_seed(seed, "waveform", class_id.value),
        sample_rate_hz=sample_rate_hz,
        subcarrier_spacing_hz=scs,
        occupancy=float(rng.uniform(lo, hi)) if hi > lo else float(hi),
        traffic_model=str(fam.traffic[rng.integers(len(fam.traffic))]),
        cp_fraction=float(fam.cp_fraction[rng.integers(len(fam.cp_fraction))]),
        pilot_spacing=fam.pilot_spacing,
        contiguous=fam.contiguous,
        tx_filter=gen in ("ofdm", "scfdma"),
        bursts=fam.bursts,
        rolloff=float(rng.uniform(*fam.rolloff)),
        mod_depth=float(rng.uniform(*fam.mod_depth)),
    )


def gen_class(class_id, duration_s, seed, sample_rate_hz=DESK_RATE_HZ):
    """Generate one labelled signal for any known or unknown class."""
    gen, spec = draw_spec(class_id, duration_s, seed, sample_rate_hz)
    sig = _GENERATORS[gen](spec)
    sig.class_label = spec.class_id.value
    sig.meta["class_seed"] = int(seed)
    return sig


def gen_known_class(class_id, duration_s, seed, sample_rate_hz=DESK_RATE_HZ):
    if ClassId(class_id) not in KNOWN_CLASSES:
        raise InvalidSpec(f"{class_id} is not a known class")
    return gen_class(class_id, duration_s, seed, sample_rate_hz)


def gen_unknown_class(class_id, duration_s, seed, sample_rate_hz=DESK_RATE_HZ):
    if ClassId(class_id) not in UNKNOWN_CLASSES:
        raise InvalidSpec(f"{class_id} is not an unknown class")
    return gen_class(class_id, duration_s, seed, sample_rate_hz)
