"""Seeded baseband I/Q synthesis for the known and unknown signal classes."""

from .analog import gen_analog
from .families import FAMILIES, Family, draw_spec, gen_class, gen_known_class, gen_unknown_class
from .gfsk import gen_gfsk
from .multicarrier import gen_ofdm, gen_scfdma
from .resample import resample
from .single_carrier import gen_sc, rrc_pulse
from .types import (
    DESK_RATE_HZ,
    KNOWN_CLASSES,
    MODULATIONS,
    PAPER_RATE_HZ,
    UNKNOWN_CLASSES,
    ClassId,
    IqSignal,
    WaveformSpec,
    constellation,
)

__all__ = [
    "DESK_RATE_HZ", "FAMILIES", "KNOWN_CLASSES", "MODULATIONS", "PAPER_RATE_HZ",
    "UNKNOWN_CLASSES", "ClassId", "Family", "IqSignal", "WaveformSpec", "constellation",
    "draw_spec", "gen_analog", "gen_class", "gen_gfsk", "gen_known_class", "gen_ofdm",
    "gen_scfdma", "gen_sc", "gen_unknown_class", "resample", "rrc_pulse",
]
