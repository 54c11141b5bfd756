"""Deterministic random streams on top of the Philox 4x64 counter generator.

Every draw is computed from the raw 64-bit Philox output with fixed
arithmetic (documented per method), so a given (seed, stream) pair yields
the same byte sequence on every platform and every numpy release.  Only
the bit generator itself is borrowed from numpy; none of the
``numpy.random.Generator`` distribution methods are used, since their
streams are not covered by numpy's compatibility guarantee.

Streams: a run derives independent substreams by varying the second
Philox key word, e.g. ``Rng(seed, stream=GRAFT_STREAM)``.  Stream ids
used by the trainer are listed in ``spd.training``.
"""

from __future__ import annotations

import numpy as np

# A double in [0, 1) keeps the top 53 bits of one 64-bit word.
_DOUBLE_SCALE = 2.0 ** -53


class Rng:
    """Seeded random stream with reproducible, platform-independent draws."""

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)
        self.stream = int(stream)
        self._bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream], dtype=np.uint64)
        )

    def derive(self, stream: int) -> "Rng":
        """Fresh, statistically independent stream for the same seed."""
        return Rng(self.seed, stream)

    def raw(self, n: int) -> np.ndarray:
        """n raw 64-bit words straight from the generator."""
        return self._bitgen.random_raw(n)

    def random(self, n: int | None = None):
        """Doubles in [0, 1): top 53 bits of one word, times 2**-53."""
        if n is None:
            return float((self.raw(1)[0] >> np.uint64(11)) * _DOUBLE_SCALE)
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE

    def uniform(self, low: float, high: float, n: int | None = None):
        """low + (high - low) * u for u in [0, 1)."""
        return low + (high - low) * self.random(n)

    def bernoulli(self, p: float, n: int) -> np.ndarray:
        """Indicator array: u < p, one word per draw."""
        return (self.random(n) < p).astype(np.int64)

    def integers(self, n: int, high: int) -> np.ndarray:
        """Ints in [0, high) via floor(u * high).

        The floor construction carries a ~2**-53 relative bias, which is
        irrelevant for shuffling and sampling at this scale.
        """
        return np.minimum((self.random(n) * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates over range(n), one draw per position from the end."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = int(self.random() * (i + 1))
            if j > i:
                j = i
            perm[i], perm[j] = perm[j], perm[i]
        return perm
