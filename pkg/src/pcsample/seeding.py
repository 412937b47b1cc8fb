"""Deterministic random streams.

All randomness in the package flows through numpy's PCG64 generator, which is
fully specified by its seed material and behaves identically across platforms.
Independent sub-streams (one per grid cell, per region, per corpus cloud, ...)
are derived by feeding the base seed together with integer partition
identifiers into a :class:`numpy.random.SeedSequence`, so two partitions never
share a stream and the whole construction is reproducible from a single
64-bit seed.
"""

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

# Stream tags keep unrelated consumers of the same base seed apart.
STREAM_SAMPLE = 0x5A
STREAM_BACKGROUND = 0xB6
STREAM_REGION = 0x9E
STREAM_CELL = 0xC3
STREAM_LEAF = 0x0C
STREAM_SCENE = 0x51
STREAM_LAYOUT = 0x17
STREAM_CORPUS = 0xC0


def seed_sequence(*entropy: int) -> np.random.SeedSequence:
    """Build a SeedSequence from integer entropy words (masked to 64 bits)."""
    return np.random.SeedSequence([int(e) & _MASK64 for e in entropy])


def derive_rng(*entropy: int) -> np.random.Generator:
    """Return a PCG64 generator for the sub-stream named by ``entropy``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(*entropy)))


def derive_seed(*entropy: int) -> int:
    """Collapse a sub-stream name to a single reproducible 64-bit seed."""
    state = seed_sequence(*entropy).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
