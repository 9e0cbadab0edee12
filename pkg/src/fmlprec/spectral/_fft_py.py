"""Numpy radix-2 FFT kernel used when the compiled extension is unavailable."""
import numpy as np


def fft_pow2_rows(a: np.ndarray, bitrev: np.ndarray, twiddles: np.ndarray) -> None:
    """Forward FFT of every row of ``a`` in place (same contract as the Cython kernel)."""
    rows, m = a.shape
    a[:] = a[:, bitrev]
    size = 2
    while size <= m:
        half = size // 2
        w = twiddles[:: m // size][:half]
        blocks = a.reshape(rows, m // size, size)
        u = blocks[:, :, :half].copy()
        t = blocks[:, :, half:] * w
        blocks[:, :, :half] = u + t
        blocks[:, :, half:] = u - t
        size *= 2


def bluestein_rows(x, out, bitrev, twiddles, chirp, b_hat) -> None:
    """Forward DFT of every row of ``x`` into ``out`` via a chirp convolution."""
    rows, n = x.shape
    m = b_hat.shape[0]
    work = np.zeros((rows, m), dtype=np.complex128)
    work[:, :n] = x * chirp
    fft_pow2_rows(work, bitrev, twiddles)
    work *= b_hat
    np.conjugate(work, out=work)
    fft_pow2_rows(work, bitrev, twiddles)
    out[:] = np.conjugate(work[:, :n]) * (chirp / m)
