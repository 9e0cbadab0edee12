"""Seeded random source shared by initialization, dropout and sampling."""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .tensor import Tensor


class Rng:
    """PCG64 stream; identical seeds give identical draws on every platform."""

    def __init__(self, seed: int | tuple[int, ...] = 0):
        self.seed = seed
        entropy = list(seed) if isinstance(seed, tuple) else int(seed)
        self.gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    @classmethod
    def derive(cls, *keys: int) -> "Rng":
        """Independent stream keyed by a tuple, e.g. ``(seed, epoch)``."""
        return cls(tuple(int(k) for k in keys))

    def normal(self, shape, std: float = 1.0) -> np.ndarray:
        return self.gen.normal(0.0, std, size=shape)

    def random(self, shape=None) -> np.ndarray:
        return self.gen.random(shape)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self.gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, a, size: int, replace: bool = True) -> np.ndarray:
        return self.gen.choice(a, size=size, replace=replace)


def init_normal(rng: Rng, shape, std: float, name: str | None = None) -> Tensor:
    """Trainable tensor with i.i.d. N(0, std^2) entries."""
    if not std > 0:
        raise InvalidArgumentError(f"std must be positive, got {std}")
    return Tensor(rng.normal(shape, std), requires_grad=True, name=name)
