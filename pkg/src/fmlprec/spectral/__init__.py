"""Fourier transforms, the circular-convolution reference and classical masks."""
from ._backend import BACKEND, KERNELS
from .convolution import circular_convolve
from .masks import FilterKind, FilterMask, make_mask
from .transforms import (
    Spectrum,
    dft_naive,
    fft,
    irfft,
    irfft_along,
    is_power_of_two,
    rfft,
    rfft_along,
)

__all__ = [
    "BACKEND",
    "KERNELS",
    "FilterKind",
    "FilterMask",
    "Spectrum",
    "circular_convolve",
    "dft_naive",
    "fft",
    "irfft",
    "irfft_along",
    "is_power_of_two",
    "make_mask",
    "rfft",
    "rfft_along",
]
