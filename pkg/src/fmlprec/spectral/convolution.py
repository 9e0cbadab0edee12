import numpy as np

from ..errors import InvalidArgumentError


def circular_convolve(f, h) -> np.ndarray:
    """Direct O(N^2) circular convolution ``y[n] = sum_m h[m] f[(n - m) mod N]``."""
    f = np.asarray(f, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if f.ndim != 1 or f.shape != h.shape or f.size == 0:
        raise InvalidArgumentError(f"need equal non-empty lengths, got {f.shape} and {h.shape}")
    n = f.size
    y = np.zeros(n)
    for m in range(n):
        y += h[m] * np.roll(f, m)
    return y
