"""Ordinal-keyed common random numbers.

Every uniform used by a market is addressed by a key such as
``("fit", j, r)``: the r-th fit observation of business j.  The value at a key
depends only on the master seed and the key, never on the order in which keys
are consumed, so two markets sharing a bundle see the same per-business
outcome sequences even when they inspect businesses at different times.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 256
_KINDS = {"value": 0, "fit": 1, "quality": 2, "screen": 3, "price": 4}


class _Stream:
    __slots__ = ("_gen", "_buf")

    def __init__(self, seed_words: list[int]):
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_words)))
        self._buf: list[float] = []

    def __getitem__(self, r: int) -> float:
        buf = self._buf
        while r >= len(buf):
            buf.extend(self._gen.random(max(_BLOCK, len(buf))).tolist())
        return buf[r]


class RandomnessBundle:
    """Shared randomness for one replica (the Omega of a coupled experiment).

    Parameters
    ----------
    seed : int or sequence of int
        Master seed.  Replica ``i`` of an experiment with master seed ``s``
        uses ``RandomnessBundle((s, i))``.
    """

    def __init__(self, seed):
        self.seed = tuple(int(s) for s in np.atleast_1d(seed))
        self._streams: dict[tuple, _Stream] = {}

    def _stream(self, key: tuple) -> _Stream:
        s = self._streams.get(key)
        if s is None:
            s = self._streams[key] = _Stream([*self.seed, *key])
        return s

    def stream(self, kind: str, *ids: int) -> _Stream:
        """Indexable stream of uniforms for ``(kind, *ids)``."""
        return self._stream((_KINDS[kind], *ids))

    def value_uniform(self, t: int) -> float:
        """Uniform driving the consumer value of round ``t`` (0-based)."""
        return self.stream("value")[t]

    def fit_uniform(self, j: int, r: int) -> float:
        return self.stream("fit", j)[r]

    def quality_uniform(self, j: int, r: int) -> float:
        return self.stream("quality", j)[r]

    def screen_uniform(self, j: int, screen: int, r: int) -> float:
        return self.stream("screen", j, screen)[r]

    def fit_bit(self, j: int, r: int, p: float) -> int:
        """Monotone coupling: the bit is 1 iff the uniform falls below ``p``."""
        return int(self.fit_uniform(j, r) < p)

    def quality_bit(self, j: int, r: int, p: float) -> int:
        return int(self.quality_uniform(j, r) < p)
