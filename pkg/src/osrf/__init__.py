"""Open-set wireless standard classification.

Subpackages and modules:

- ``osrf.waveform``: seeded baseband I/Q generators for each signal class
- ``osrf.channel``: fading, I/Q imbalance, frequency offset and AWGN
- ``osrf.features``: bootstrap slicing and STFT magnitude features
- ``osrf.nn``: a small numpy 1D CNN with Adam training
- ``osrf.openset``: sigmoid-threshold rejection and threshold sweeps
- ``osrf.dataset_io``: reproducible on-disk datasets with checksums
- ``osrf.evaluation``: accuracy versus SNR and report export
- ``osrf.cli``: the ``osrf`` command
"""

from . import channel, dataset_io, evaluation, features, nn, openset, waveform
from ._accel import BACKEND
from .errors import OsrfError

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "OsrfError", "__version__", "channel", "dataset_io", "evaluation",
    "features", "nn", "openset", "waveform",
]
