"""Discrete Fourier transforms: naive reference, radix-2/Bluestein FFT, real FFT.

Conventions: the forward transform is unnormalized and the inverse carries
the ``1/N`` factor. Batched helpers transform along one axis of an array.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InvalidArgumentError
from . import _backend


@dataclass(frozen=True)
class Spectrum:
    """Non-redundant half spectrum of a real sequence of length ``origin_len``."""

    bins: np.ndarray
    origin_len: int

    def __post_init__(self):
        if self.origin_len < 1:
            raise InvalidArgumentError("origin_len must be positive")
        if len(self.bins) != self.origin_len // 2 + 1:
            raise InvalidArgumentError(
                f"{len(self.bins)} bins inconsistent with origin_len={self.origin_len}"
            )

    def full(self) -> np.ndarray:
        """All ``origin_len`` bins, rebuilt by conjugate symmetry."""
        return _hermitian_extend(np.asarray(self.bins, dtype=np.complex128), self.origin_len)


def dft_naive(x, inverse: bool = False) -> np.ndarray:
    """O(N^2) DFT straight from the definition. Used as the FFT oracle."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise InvalidArgumentError("dft_naive needs a non-empty 1-D sequence")
    n = x.size
    sign = 1.0 if inverse else -1.0
    idx = np.arange(n)
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        # (j*k) mod n keeps the phase argument small for long inputs
        phase = sign * 2.0 * np.pi * ((idx * k) % n) / n
        out[k] = np.sum(x * np.exp(1j * phase))
    if inverse:
        out /= n
    return out


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _pow2_plan(m: int) -> tuple[np.ndarray, np.ndarray]:
    bits = m.bit_length() - 1
    idx = np.arange(m)
    bitrev = np.zeros(m, dtype=np.int64)
    for b in range(bits):
        bitrev |= ((idx >> b) & 1) << (bits - 1 - b)
    twiddles = np.exp(-2j * np.pi * np.arange(max(m // 2, 1)) / m)
    bitrev.setflags(write=False)
    twiddles.setflags(write=False)
    return bitrev, twiddles


def _fft_pow2(rows: np.ndarray, kernels) -> None:
    bitrev, twiddles = _pow2_plan(rows.shape[1])
    kernels.fft_pow2_rows(rows, bitrev, twiddles)


@lru_cache(maxsize=None)
def _bluestein_plan(n: int) -> tuple[int, np.ndarray, np.ndarray]:
    m = 1
    while m < 2 * n - 1:
        m *= 2
    k = np.arange(n)
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    b = np.zeros((1, m), dtype=np.complex128)
    b[0, :n] = np.conj(chirp)
    b[0, m - n + 1:] = np.conj(chirp[1:])[::-1]
    _fft_pow2(b, _backend.KERNELS["python"])
    chirp.setflags(write=False)
    b.setflags(write=False)
    return m, chirp, b[0]


def _fft_rows(rows: np.ndarray, kernels) -> np.ndarray:
    """Forward FFT of each row of a C-contiguous complex128 2-D array."""
    n = rows.shape[1]
    if is_power_of_two(n):
        _fft_pow2(rows, kernels)
        return rows
    # Bluestein: the DFT as a linear convolution with a chirp, evaluated by
    # power-of-two FFTs of length m >= 2n - 1
    m, chirp, b_hat = _bluestein_plan(n)
    bitrev, twiddles = _pow2_plan(m)
    out = np.empty_like(rows)
    kernels.bluestein_rows(rows, out, bitrev, twiddles, chirp, b_hat)
    return out


def fft(x, inverse: bool = False, axis: int = -1, backend: str | None = None) -> np.ndarray:
    """FFT of any length along ``axis``; same contract as :func:`dft_naive`."""
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim == 0 or a.size == 0:
        raise InvalidArgumentError("fft needs a non-empty sequence")
    kernels = _backend.KERNELS[backend] if backend else _backend.kernels
    a = np.moveaxis(a, axis, -1)
    shape = a.shape
    n = shape[-1]
    rows = np.array(a.reshape(-1, n), dtype=np.complex128, order="C", copy=True)
    if inverse:
        np.conjugate(rows, out=rows)
        rows = _fft_rows(rows, kernels)
        rows = np.conjugate(rows) / n
    else:
        rows = _fft_rows(rows, kernels)
    return np.moveaxis(rows.reshape(shape), -1, axis)


def _as_rows(x: np.ndarray, axis: int) -> tuple[np.ndarray, tuple[int, ...]]:
    x = np.moveaxis(x, axis, -1)
    return x.reshape(-1, x.shape[-1]), x.shape


def _from_rows(rows: np.ndarray, shape: tuple[int, ...], axis: int) -> np.ndarray:
    return np.moveaxis(rows.reshape(shape[:-1] + rows.shape[-1:]), -1, axis)


def rfft_along(x, axis: int = -1, backend: str | None = None) -> np.ndarray:
    """First ``n//2 + 1`` FFT bins of real data along ``axis``.

    Two real rows are transformed at once as the real and imaginary parts
    of one complex row, then separated by conjugate symmetry.
    """
    x = np.asarray(x, dtype=np.float64)
    rows, shape = _as_rows(x, axis)
    n = rows.shape[1]
    if n == 0:
        raise InvalidArgumentError("rfft needs a non-empty sequence")
    k = n // 2 + 1
    if len(rows) % 2:
        rows = np.concatenate([rows, np.zeros((1, n))])
    z = fft(rows[0::2] + 1j * rows[1::2], backend=backend)
    z_rev = np.conj(z[:, (-np.arange(k)) % n])
    z = z[:, :k]
    out = np.empty((len(rows), k), dtype=np.complex128)
    out[0::2] = 0.5 * (z + z_rev)
    out[1::2] = -0.5j * (z - z_rev)
    return _from_rows(out[:int(np.prod(shape[:-1], dtype=np.int64))], shape, axis)


def _hermitian_extend(bins: np.ndarray, n: int, axis: int = -1) -> np.ndarray:
    bins = np.moveaxis(bins, axis, -1)
    k = bins.shape[-1]
    full = np.empty(bins.shape[:-1] + (n,), dtype=np.complex128)
    full[..., :k] = bins
    if n > k:
        # X[n-j] = conj(X[j]) for j = 1 .. n-k
        full[..., k:] = np.conj(bins[..., 1:n - k + 1][..., ::-1])
    return np.moveaxis(full, -1, axis)


def irfft_along(bins, n: int, axis: int = -1, backend: str | None = None) -> np.ndarray:
    """Inverse of :func:`rfft_along`; returns the real part of the inverse FFT.

    Imaginary parts of the DC bin (and of the Nyquist bin for even ``n``)
    cannot be represented by a real signal and are ignored.
    """
    bins = np.asarray(bins, dtype=np.complex128)
    if n < 1 or bins.shape[axis] != n // 2 + 1:
        raise InvalidArgumentError(
            f"{bins.shape[axis]} bins inconsistent with length {n}"
        )
    rows, shape = _as_rows(bins, axis)
    count = len(rows)
    rows = rows.copy()
    rows[:, 0] = rows[:, 0].real
    if n % 2 == 0:
        rows[:, -1] = rows[:, -1].real
    if count % 2:
        rows = np.concatenate([rows, np.zeros((1, rows.shape[1]), dtype=np.complex128)])
    # both halves are Hermitian now, so one complex inverse yields two real rows
    packed = _hermitian_extend(rows[0::2], n) + 1j * _hermitian_extend(rows[1::2], n)
    z = fft(packed, inverse=True, backend=backend)
    out = np.empty((len(rows), n))
    out[0::2] = z.real
    out[1::2] = z.imag
    return _from_rows(out[:count], shape[:-1] + (n,), axis)


def rfft(x, n: int | None = None) -> Spectrum:
    """Half spectrum of a real sequence of length ``n``."""
    x = np.asarray(x, dtype=np.float64)
    if n is None:
        n = x.size
    if x.ndim != 1 or x.size != n or n < 1:
        raise InvalidArgumentError(f"expected a real sequence of length {n}, got shape {x.shape}")
    return Spectrum(rfft_along(x), n)


def irfft(s: Spectrum) -> np.ndarray:
    return irfft_along(s.bins, s.origin_len)
