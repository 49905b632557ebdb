"""Seed derivation.

Every random draw in the package comes from a ``numpy.random.Generator``
backed by PCG64 (O'Neill's permuted congruential generator, 128-bit state),
whose output stream is specified bit-for-bit and identical on every platform.
Sub-seeds are derived by hashing the parent seed together with a purpose
path, so adding a new consumer never shifts the stream of an existing one.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed, *purpose):
    """Stable 64-bit child seed for ``(seed, *purpose)`` using BLAKE2b."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _MASK64).encode())
    for part in purpose:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed, *purpose):
    if purpose:
        seed = derive_seed(seed, *purpose)
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
