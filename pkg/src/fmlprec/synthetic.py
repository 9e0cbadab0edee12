"""Synthetic periodic interaction logs for desk-scale experiments.

Items are partitioned into fixed cycles of ``period`` items. Every user
walks one cycle from a random phase; with probability ``noise`` a uniformly
random item is interleaved before the next cycle step.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .rng import Rng


def periodic_sequences(
    num_users: int = 500,
    num_items: int = 200,
    period: int = 4,
    noise: float = 0.2,
    min_len: int = 20,
    max_len: int = 30,
    seed: int = 0,
) -> dict[str, list[str]]:
    if num_items % period:
        raise InvalidArgumentError("num_items must be a multiple of period")
    if not 0.0 <= noise < 1.0 or min_len > max_len:
        raise InvalidArgumentError("bad noise rate or length range")
    rng = Rng(seed)
    cycles = rng.permutation(num_items).reshape(-1, period) + 1
    out = {}
    for u in range(num_users):
        cycle = cycles[rng.integers(0, len(cycles))]
        phase = int(rng.integers(0, period))
        length = int(rng.integers(min_len, max_len + 1))
        seq = []
        while len(seq) < length:
            if rng.random() < noise:
                seq.append(int(rng.integers(1, num_items + 1)))
            else:
                seq.append(int(cycle[phase % period]))
                phase += 1
        out[f"u{u}"] = [f"i{i}" for i in seq]
    return out


def write_triplets(sequences: dict[str, list[str]], path) -> None:
    """Write ``user<TAB>item<TAB>timestamp`` lines, one timestamp step per action."""
    lines = []
    for user, items in sequences.items():
        lines += [f"{user}\t{item}\t{1_000_000 + t}" for t, item in enumerate(items)]
    Path(path).write_text("\n".join(lines) + "\n")
