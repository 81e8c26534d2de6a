"""Counter-based deterministic random values.

Every random quantity in the simulator is a pure function of
``(key, stream, counter)``, produced by :func:`prf64`.  There is no stateful
generator: slots can be evaluated in any order, split across any number of
workers, and still reproduce bit-identical results.

The mixer is the SplitMix64 finalizer (Steele, Lea & Flood's constants),
applied as a running absorption of the three input words.

Counter conventions used across the package:

* ``0`` - per-slot salt material and per-slot sortition hashes
* ``1`` - derived seeds (default miner seeds, split-account seeds)
* ``2`` - the uniform draw behind weighted inverse-CDF selection
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
HASH_RANGE = 1 << 64

# Published SplitMix64 constants.
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_NP_GOLDEN = np.uint64(GOLDEN)
_NP_MUL1 = np.uint64(_MUL1)
_NP_MUL2 = np.uint64(_MUL2)
_NP_S30 = np.uint64(30)
_NP_S27 = np.uint64(27)
_NP_S31 = np.uint64(31)


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche over 64-bit words."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def absorb(acc: int, word: int) -> int:
    """One SplitMix64 step seeded by the running value plus an input word."""
    return mix64((acc + word + GOLDEN) & MASK64)


def prf64(key: int, stream: int, counter: int) -> int:
    """Deterministic 64-bit value for a (key, stream, counter) triple.

    Statistically uniform over [0, 2**64); injective in each argument when
    the other two are fixed (each absorption step is a bijection).
    """
    return absorb(absorb(absorb(0, key), stream), counter)


def unit_draw(key: int, stream: int, counter: int) -> float:
    """prf64 scaled into [0, 1) as a double."""
    return prf64(key, stream, counter) / HASH_RANGE


# ---------------------------------------------------------------------------
# Vectorized path.  Operates on uint64 arrays; numpy array arithmetic wraps
# modulo 2**64, matching the scalar functions bit for bit (property-tested).
# Keep everything on arrays: numpy *scalar* uint64 ops emit overflow warnings.
# ---------------------------------------------------------------------------


def np_mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _NP_S30)) * _NP_MUL1
    z = (z ^ (z >> _NP_S27)) * _NP_MUL2
    return z ^ (z >> _NP_S31)


def np_absorb(acc: np.ndarray, word) -> np.ndarray:
    return np_mix64(acc + word + _NP_GOLDEN)


def np_prf64(key, stream, counter) -> np.ndarray:
    """Vectorized prf64; arguments broadcast like numpy uint64 operands.

    Inputs are lifted to 1-d arrays internally: 0-d uint64 operations decay
    to numpy scalars, whose overflow behavior raises warnings instead of
    wrapping.
    """
    key, stream, counter = (
        np.atleast_1d(np.asarray(a, dtype=np.uint64)) for a in (key, stream, counter)
    )
    shape = np.broadcast_shapes(key.shape, stream.shape, counter.shape)
    acc = np_mix64(np.broadcast_to(key, shape).copy() + _NP_GOLDEN)
    acc = np_absorb(acc, stream)
    return np_absorb(acc, counter)
