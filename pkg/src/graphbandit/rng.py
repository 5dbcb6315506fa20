"""Seeded random streams.

Every stream is a PCG64 generator keyed by ``(master seed, role, *indices)``
through ``SeedSequence.spawn_key``; nothing touches a global generator.  A
replicate's randomness therefore depends only on its own key, never on how
replicates are batched or scheduled across workers.
"""

from __future__ import annotations

import numpy as np

ENV = 0
LEARNER = 1
GRAPH = 2

BLOCK = 1024


def generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


class UniformStream:
    """One uniform draw per round for each of several runs.

    Draws are pulled from each run's generator in blocks; the values are the
    same as drawing one number at a time.
    """

    def __init__(self, seed: int, key: tuple, run_ids, block: int = BLOCK):
        self.gens = [generator(seed, *key, int(r)) for r in run_ids]
        self.block = block
        self._buf = np.empty((len(self.gens), 0))
        self._pos = 0

    def draw(self) -> np.ndarray:
        if self._pos >= self._buf.shape[1]:
            self._buf = np.stack([g.random(self.block) for g in self.gens])
            self._pos = 0
        u = self._buf[:, self._pos]
        self._pos += 1
        return u
