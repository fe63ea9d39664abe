"""Deterministic derivation of random streams.

Every source of randomness in the package flows from one master seed.
Independent sub-streams are derived by name so that adding a consumer in one
place never shifts the draws seen by another.
"""

import hashlib

import numpy as np

__all__ = ["ensure_generator", "named_stream", "derive_seed"]

_MASK64 = (1 << 64) - 1


def ensure_generator(seed):
    """Coerce ``seed`` (int, None, or Generator) into a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def named_stream(master_seed, *labels):
    """Return a generator derived from a master seed and string labels.

    The same (seed, labels) pair always yields the same stream; distinct
    labels yield statistically independent streams.
    """
    digest = hashlib.sha256("/".join(str(x) for x in labels).encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]
    entropy = [int(master_seed) & _MASK64, *words]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(master_seed, *labels):
    """Collapse a named stream into a plain integer seed."""
    return int(named_stream(master_seed, *labels).integers(0, 2**31 - 1))
