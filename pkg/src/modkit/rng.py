"""Seed derivation.

All randomness flows from a single integer master seed.  Independent streams
are derived by hashing ``(master_seed, *keys)`` through numpy's
:class:`~numpy.random.SeedSequence` and feeding the result to a PCG64
generator::

    stream(seed, k1, k2, ...) = Generator(PCG64(SeedSequence([seed, k1, k2, ...])))

Keys are small non-negative integers: a purpose tag (see the constants
below) followed by indices such as the repetition or tree number.  Because a
stream depends only on its key tuple, jobs can run in any order or in
parallel and still see identical random numbers.  SeedSequence's hashing and
PCG64 are both frozen by numpy's stream-compatibility policy.
"""

import numpy as np

PARTITION = 1
TRAIN = 2
PERMUTE = 3
TREE = 4
SYNTH = 5
IMPORTANCE = 6
STRATUM = 7


def _entropy(seed, keys):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return [seed, *(int(k) for k in keys)]


def stream(seed, *keys):
    """Return an independent generator for ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_entropy(seed, keys))))


def derive_seed(seed, *keys):
    """Derive a 63-bit integer seed for ``(seed, *keys)``."""
    state = np.random.SeedSequence(_entropy(seed, keys)).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def as_generator(rng):
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
