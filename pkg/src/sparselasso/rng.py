"""Counter-based random streams built on the splitmix64 finalizer.

Every random quantity in the sampling layer is a pure function of
(key, counter), so draws are order-independent and trivially parallel:
the bits for matrix entry (i, j) depend only on the stream key and the
packed counter i * 2^32 + j, never on how many entries were drawn before
it.  Keys for distinct purposes (Bernoulli pattern, Gaussian values,
noise, ...) are derived from a user seed plus an ascii tag, so the
pattern and value streams of a matrix are independent and can be
re-seeded separately.

Normals use the inverse CDF applied to a 53-bit uniform placed at odd
multiples of 2^-54, which can never be exactly 0, 1, or 1/2; in
particular ndtri never returns an exact zero.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_PHI = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# Stream tags (ascii), xored into the key chain one per derivation step.
TAG_PATTERN = 0x5041545445524E  # "PATTERN"
TAG_VALUE = 0x56414C5545  # "VALUE"
TAG_NOISE = 0x4E4F495345  # "NOISE"
TAG_SIGNS = 0x5349474E53  # "SIGNS"
TAG_TRIAL = 0x545249414C  # "TRIAL"
TAG_THIN = 0x5448494E  # "THIN"

GENERATOR_NAME = "splitmix64"
NORMAL_METHOD = "inverse_cdf"


def _finalize(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 output finalizer; bijective on 64-bit words."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_key(seed: int, *tags: int) -> int:
    """Derive a stream key from a seed and a chain of tag words.

    The chain is a sequence of bijective absorption steps, so for a fixed
    seed and tag prefix, distinct final tags give distinct keys.
    """
    with np.errstate(over="ignore"):
        h = _finalize(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _PHI)
        for tag in tags:
            h = _finalize((h + _PHI) ^ np.uint64(tag & 0xFFFFFFFFFFFFFFFF))
    return int(h)


def bits_at(key: int, counters: np.ndarray) -> np.ndarray:
    """64-bit words of the stream `key` at the given counters (uint64 array)."""
    with np.errstate(over="ignore"):
        z = np.uint64(key) + _PHI * (np.asarray(counters, dtype=np.uint64) + np.uint64(1))
        return _finalize(z)


def uniforms_at(key: int, counters: np.ndarray) -> np.ndarray:
    """Uniforms in the open interval (0, 1) at the given counters."""
    b = bits_at(key, counters)
    return (b >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54


def normals_at(key: int, counters: np.ndarray) -> np.ndarray:
    """Standard normals at the given counters (fixed inverse-CDF method)."""
    return ndtri(uniforms_at(key, counters))


def bernoulli_threshold(prob: float) -> int:
    """uint64 threshold t such that (bits < t) has probability `prob`.

    Exact for prob = 1 by construction elsewhere (callers treat prob == 1
    as "all pass"); here prob must be in [0, 1).  The product prob * 2^64
    is an exact float scaling of the 53-bit mantissa, so the threshold is
    platform-independent.
    """
    if not 0.0 <= prob < 1.0:
        raise ValueError("bernoulli_threshold requires 0 <= prob < 1")
    return int(prob * 2.0**64)
