"""Seed derivation.

Every random stream is keyed by ``(root seed, *labels)`` through
``numpy.random.SeedSequence``, so a stream depends only on its key and
never on how many other streams were drawn before it or in which order.
"""

import hashlib

import numpy as np

MAX_SEED = 2**64 - 1


def _word(label):
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"seed labels must be non-negative, got {label}")
        return int(label)
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(seed, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence([_word(seed), *(_word(lab) for lab in labels)])


def derive_rng(seed, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *labels)))


def derive_seed(seed, *labels) -> int:
    """A 32-bit seed for consumers that only take ``int`` seeds."""
    return int(seed_sequence(seed, *labels).generate_state(1, dtype=np.uint32)[0])


def check_seed(seed) -> int:
    """Normalise ``None``/int seeds to a non-negative int in the 64-bit range."""
    if seed is None:
        return 0
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return int(seed)
