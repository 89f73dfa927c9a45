"""Seeded random source shared by exploration, interposing and replay sampling."""

import random

import numpy as np


class RandomSource:
    """Scalar draws come from ``random.Random``; index batches from a numpy
    ``Generator``. Both streams are derived from the same integer seed, so a
    session is reproducible from that seed alone."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._py = random.Random(self.seed)
        self._np = np.random.default_rng(np.random.SeedSequence([self.seed, 0x5EED]))
        self.random = self._py.random
        self._block = np.empty(0)
        self._pos = 0

    def randbelow(self, n: int) -> int:
        return int(self._py.random() * n)

    def choice(self, items):
        """Uniform pick from a sequence, or from a set in sorted order."""
        if not isinstance(items, (list, tuple)):
            items = sorted(items)
        return items[int(self._py.random() * len(items))]

    def indices(self, n: int, k: int) -> np.ndarray:
        """``k`` uniform integers in ``[0, n)``, drawn from a pre-generated
        block of uniforms (one numpy call per 8192 draws)."""
        if self._pos + k > len(self._block):
            self._block = self._np.random(max(8192, k))
            self._pos = 0
        u = self._block[self._pos: self._pos + k]
        self._pos += k
        return (u * n).astype(np.int64)


def env_seed(seed: int, episode: int) -> int:
    """Per-episode environment seed, independent of the agent's stream."""
    return int(np.random.SeedSequence([int(seed), int(episode), 0xE4]).generate_state(1)[0])
