"""Seeded, labelled random streams.

Every source of randomness in the workbench is drawn from an `Rng`, which
couples a 64-bit seed with a stream label such as ``"init/tok_emb"`` or
``"shuffle/epoch3"``. The same (seed, label) pair always yields the same
value sequence; distinct labels yield statistically independent streams.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


class Rng:
    """A deterministic random stream identified by (seed, stream label)."""

    def __init__(self, seed: int, stream: str = "root"):
        if not 0 <= int(seed) < 2 ** 63:
            raise ValueError(f"seed out of range: {seed}")
        self.seed = int(seed)
        self.stream_label = stream
        ss = np.random.SeedSequence(self.seed, spawn_key=_label_key(stream))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def stream(self, label: str) -> "Rng":
        """Derive an independent stream with the same seed."""
        return Rng(self.seed, label)

    def substream(self, label: str) -> "Rng":
        """Derive a stream nested under the current label."""
        return Rng(self.seed, f"{self.stream_label}/{label}")

    # Thin passthroughs so call sites read naturally.
    def normal(self, shape, std: float = 1.0, dtype=np.float32) -> np.ndarray:
        return (self.gen.standard_normal(size=shape, dtype=np.float64) * std).astype(dtype)

    def integers(self, low: int, high: int, size=None):
        return self.gen.integers(low, high, size=size)

    def random(self, size=None):
        return self.gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, seq, size=None, replace=True):
        return self.gen.choice(seq, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream_label!r})"
