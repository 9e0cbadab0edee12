"""Classical 0/1 frequency masks (low-pass, high-pass, band-stop)."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError


class FilterKind(str, enum.Enum):
    ALL_PASS = "allpass"
    LOW_PASS = "lowpass"
    HIGH_PASS = "highpass"
    BAND_STOP = "bandstop"


@dataclass(frozen=True)
class FilterMask:
    kind: FilterKind
    weights: np.ndarray


def make_mask(kind: FilterKind | str, num_bins: int) -> FilterMask:
    """Build a mask over ``num_bins`` half-spectrum bins (bin 0 is DC).

    Low-pass keeps ``[0, ceil(K/2))``, high-pass keeps the complement, and
    band-stop zeroes ``[floor(K/4), floor(3K/4))``.
    """
    kind = FilterKind(kind)
    if num_bins < 1:
        raise InvalidArgumentError("mask needs at least one bin")
    weights = np.ones(num_bins)
    cut = -(-num_bins // 2)
    if kind is FilterKind.LOW_PASS:
        weights[cut:] = 0.0
    elif kind is FilterKind.HIGH_PASS:
        weights[:cut] = 0.0
    elif kind is FilterKind.BAND_STOP:
        weights[num_bins // 4:(3 * num_bins) // 4] = 0.0
    weights.setflags(write=False)
    return FilterMask(kind, weights)
