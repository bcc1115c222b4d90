"""Seeded random streams.

Replicate ``i`` of an experiment always uses stream ``i`` of the run seed, so
results do not depend on scheduling.  Compiled kernels receive 32-bit seeds
drawn from the stream's generator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, i: int) -> "RngStream":
        # nested streams: mix the parent stream id into the seed
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream),))
        child_seed = int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])
        return RngStream(child_seed, int(i))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot make a generator from {type(rng).__name__}")


def kernel_seed(rng: np.random.Generator) -> int:
    """32-bit seed for a compiled kernel, drawn from ``rng``."""
    return int(rng.integers(0, 2**32 - 1))
