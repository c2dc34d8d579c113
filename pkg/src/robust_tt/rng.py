"""Seeding.

All randomness comes from numpy's ``Philox`` (Philox4x64-10), a counter-based
generator whose 128-bit key selects an independent stream.  Streams are keyed
either directly by a seed or by hashing a tuple of integers through
``numpy.random.SeedSequence``; both are stable across runs and platforms.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK128 = (1 << 128) - 1


def rng_from_seed(seed):
    """Generator on the Philox stream keyed by ``seed`` (taken mod 2**128)."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK128))


def stream_rng(master_seed, index):
    """Generator for stream ``index`` under ``master_seed``.

    The key packs the low 64 bits of the master seed with the index in the
    high word, so stream ``k`` never depends on how many other streams exist.
    """
    key = (int(master_seed) & _MASK64) | ((int(index) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(*keys):
    """64-bit seed hashed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(k) & _MASK64 for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
