"""Named random streams derived from one master seed.

Every source of randomness in the pipeline (dataset shuffle, SMOTE,
parameter init, ...) pulls its own stream by name, so components stay
independently reproducible no matter in which order they run.
"""

import hashlib

import numpy as np


def derive_seed(master: int, name: str) -> int:
    """Map (master seed, stream name) to a stable 63-bit seed."""
    payload = f"{master}:{name}".encode("utf-8")
    digest = hashlib.blake2s(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little") & 0x7FFF_FFFF_FFFF_FFFF


def rng_for(master: int, name: str) -> np.random.Generator:
    """Seeded generator for one named stream."""
    return np.random.default_rng(derive_seed(master, name))
