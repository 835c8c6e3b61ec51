"""Reproducible, splittable random number streams.

Every stream is a ``numpy.random.Generator`` over the counter-based Philox
bit generator, keyed by ``SeedSequence(seed, spawn_key=(stream_id,))``. The
same ``(seed, stream_id)`` pair yields the same sequence on every platform,
and distinct stream ids give statistically independent streams.

Scalar uniforms are served from a block buffer because per-call overhead of
``Generator.random()`` dominates single-center updates.
"""
import math
import secrets
from typing import Dict, Sequence, Tuple

import numpy as np

RNG_ALGORITHM = "numpy.Philox-4x64-10/SeedSequence(seed, spawn_key=(stream_id,))"
RNG_ALGORITHM_VERSION = f"numpy-{np.__version__}"

_BLOCK = 4096
_MASK64 = (1 << 64) - 1


class RngStream:
    """Seeded stream with buffered scalar draws."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(sequence))
        self._buffer = self.generator.random(_BLOCK)
        self._cursor = 0

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        if self._cursor >= _BLOCK:
            self._buffer = self.generator.random(_BLOCK)
            self._cursor = 0
        value = self._buffer[self._cursor]
        self._cursor += 1
        return float(value)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def uniform_in_box(self, low: Sequence[float], high: Sequence[float]) -> Tuple[float, ...]:
        return tuple(lo + (hi - lo) * self.random() for lo, hi in zip(low, high))

    def poisson(self, mean: float) -> int:
        if mean <= 0.0:
            return 0
        return int(self.generator.poisson(mean))

    def normal(self, size: int) -> np.ndarray:
        return self.generator.standard_normal(size)

    def integers(self, high: int) -> int:
        return int(math.floor(self.random() * high))

    def spawn(self, stream_id: int) -> "RngStream":
        """Independent child stream keyed by this stream's seed and a new id."""
        return RngStream(self.seed, (self.stream_id * 1_000_003 + stream_id + 1) & _MASK64)

    def metadata(self) -> Dict[str, object]:
        return {
            "rng_algorithm": RNG_ALGORITHM,
            "rng_version": RNG_ALGORITHM_VERSION,
            "seed": self.seed,
            "stream_id": self.stream_id,
        }


def rng_stream(seed: int, stream_id: int = 0) -> RngStream:
    """
    Create the stream identified by ``(seed, stream_id)``.

    Args:
        seed: 64-bit experiment seed
        stream_id: 64-bit stream identifier (replica id, chain id, ...)

    Returns:
        RngStream whose output depends only on the pair
    """
    return RngStream(seed, stream_id)


def entropy_seed() -> int:
    """Fresh 63-bit seed from the OS entropy pool."""
    return secrets.randbits(63)
