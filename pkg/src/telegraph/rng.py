"""Reproducible random streams keyed by (seed, domain, substream index).

Every stream is a Philox counter-based generator whose key is derived from a
``numpy.random.SeedSequence`` with ``spawn_key = domain + (substream_index,)``.
The mapping is platform independent, so identical keys give identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Seed domains used by the Monte Carlo engine. Keeping them as distinct
# leading spawn-key entries guarantees disjoint substream spaces.
DOMAIN_GENERIC = 0
DOMAIN_TELEGRAPH = 1
DOMAIN_BROWNIAN = 2
DOMAIN_MGF = 3

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    substream_index: int = 0
    domain: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed <= _SEED_MASK:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.substream_index < 0:
            raise ValueError("substream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(*self.domain, self.substream_index))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, index, self.domain)

    def child(self, *domain: int) -> "RngStream":
        """Stream in a nested domain; its substreams never collide with the parent's."""
        return RngStream(self.seed, 0, (*self.domain, *domain))


def as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()
