"""Seeded random streams keyed by (seed, stream id)."""

import hashlib

import numpy as np


def stream_key(*parts) -> int:
    """Stable 64-bit key for a tuple of ids (independent of PYTHONHASHSEED)."""
    text = "/".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class RngStream:
    """Deterministic draw sequence for one (seed, stream_id) pair.

    Identical (seed, stream_id) pairs yield identical draws regardless of
    thread count or call site, so per-sample streams can be used in parallel.
    """

    def __init__(self, seed: int, stream_id: "int | str" = 0):
        self.seed = int(seed)
        self.stream_id = stream_id
        key = stream_id if isinstance(stream_id, int) else stream_key(stream_id)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(key,)))
        )

    def derive(self, *parts) -> "RngStream":
        """Independent child stream for a sub-key (e.g. an epoch)."""
        return RngStream(self.seed, stream_key(self.stream_id, *parts))

    def coin(self, p: float) -> bool:
        """True with probability p."""
        return bool(self._gen.random() < p)

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def normal(self, sigma: float, shape: tuple[int, ...]) -> np.ndarray:
        return self._gen.normal(0.0, sigma, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen
