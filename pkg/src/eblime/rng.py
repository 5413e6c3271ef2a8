"""Deterministic random number streams.

Every stochastic step in the package draws from a named substream of a
single master seed. Substreams are independent counter-based Philox
generators keyed by SHA-256 of ``"<seed>:<name>"``, so adding draws to one
stream never perturbs another, and the same (seed, name) pair yields the
same stream on any platform.

Stream names in use: ``masks`` (perturbation sampling), ``gumbel``
(ridge-parameter draws), ``sigma2`` (noise-variance draws), ``beta``
(coefficient draws).
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(material: str) -> bytes:
    return hashlib.sha256(material.encode("utf-8")).digest()


def substream(seed: int, name: str) -> np.random.Generator:
    """Return the named Philox substream of ``seed``."""
    key = int.from_bytes(_digest(f"{seed}:{name}")[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *parts) -> int:
    """Mix ``seed`` with identifying parts into a fresh 64-bit seed.

    Used to give each experiment cell (input, sample size, replicate)
    its own reproducible master seed.
    """
    material = ":".join([str(seed), *map(str, parts)])
    return int.from_bytes(_digest(material)[:8], "little")


def as_generator(seed_or_rng, name: str) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return substream(int(seed_or_rng), name)
