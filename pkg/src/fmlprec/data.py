"""Interaction logs, 5-core filtering, leave-one-out splits, sampling and batching."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import serialization
from .errors import EmptyDatasetError, InvalidArgumentError, ParseError
from .rng import Rng

log = logging.getLogger(__name__)

CACHE_MAGIC = b"FMLPDATA"
FORMATS = ("triplet", "grouped")


@dataclass
class InteractionLog:
    """Chronological item sequences per user with dense ids.

    ``sequences[u]`` holds 1-based item ids of user ``u``; ``user_names[u]``
    and ``item_names[i - 1]`` are the raw identifiers.
    """

    user_names: list[str]
    item_names: list[str]
    sequences: list[np.ndarray]
    timestamps: list[np.ndarray]

    @property
    def num_users(self) -> int:
        return len(self.sequences)

    @property
    def num_items(self) -> int:
        return len(self.item_names)

    @property
    def num_actions(self) -> int:
        return int(sum(len(s) for s in self.sequences))

    def encode_item(self, raw: str) -> int:
        return self.item_names.index(raw) + 1

    def decode_item(self, item: int) -> str:
        return self.item_names[item - 1]

    def raw_sequences(self) -> dict[str, list[str]]:
        return {
            u: [self.item_names[i - 1] for i in seq]
            for u, seq in zip(self.user_names, self.sequences)
        }

    def stats(self) -> dict[str, float]:
        """Sequence/item/action counts and sparsity as reported for datasets."""
        cells = self.num_users * self.num_items
        return {
            "sequences": self.num_users,
            "items": self.num_items,
            "actions": self.num_actions,
            "sparsity": 1.0 - self.num_actions / cells if cells else 1.0,
        }


def _build_log(per_user: dict[str, list[tuple[int, str]]]) -> InteractionLog:
    item_index: dict[str, int] = {}
    item_names: list[str] = []
    sequences, timestamps = [], []
    for user, recs in per_user.items():
        # stable sort keeps file order among equal timestamps
        recs = sorted(recs, key=lambda r: r[0])
        ids = []
        for _, item in recs:
            if item not in item_index:
                item_names.append(item)
                item_index[item] = len(item_names)
            ids.append(item_index[item])
        sequences.append(np.array(ids, dtype=np.int64))
        timestamps.append(np.array([t for t, _ in recs], dtype=np.int64))
    return InteractionLog(list(per_user), item_names, sequences, timestamps)


def ingest(path, fmt: str = "triplet") -> InteractionLog:
    """Parse a ``user<TAB>item<TAB>timestamp`` file or a grouped ``user item...`` file."""
    if fmt not in FORMATS:
        raise InvalidArgumentError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    per_user: dict[str, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if fmt == "triplet":
                parts = line.split("\t")
                if len(parts) != 3 or not all(p.strip() for p in parts):
                    raise ParseError(f"expected user<TAB>item<TAB>timestamp, got {line!r}", lineno)
                user, item, ts = (p.strip() for p in parts)
                try:
                    t = int(ts)
                except ValueError:
                    raise ParseError(f"timestamp {ts!r} is not an integer", lineno) from None
                per_user.setdefault(user, []).append((t, item))
            else:
                parts = line.split()
                if len(parts) < 2:
                    raise ParseError("grouped line needs a user and at least one item", lineno)
                recs = per_user.setdefault(parts[0], [])
                recs.extend((len(recs) + j, item) for j, item in enumerate(parts[1:]))
    if not per_user:
        raise InvalidArgumentError(f"{path}: no interactions")
    return _build_log(per_user)


def from_sequences(raw: dict[str, Sequence[str]]) -> InteractionLog:
    """Build a log from already chronological per-user item lists."""
    return _build_log({u: list(enumerate(items)) for u, items in raw.items()})


def apply_core_filter(log_: InteractionLog, min_count: int = 5) -> InteractionLog:
    """Drop items and users with fewer than ``min_count`` interactions until nothing changes."""
    seqs = [s.copy() for s in log_.sequences]
    stamps = [t.copy() for t in log_.timestamps]
    users = list(range(log_.num_users))
    while True:
        counts = np.bincount(np.concatenate(seqs) if seqs else np.zeros(0, np.int64),
                             minlength=log_.num_items + 1)
        keep_item = counts >= min_count
        changed = False
        new_seqs, new_stamps, new_users = [], [], []
        for u, s, t in zip(users, seqs, stamps):
            m = keep_item[s]
            if not m.all():
                changed = True
                s, t = s[m], t[m]
            if len(s) < min_count:
                changed = True
                continue
            new_seqs.append(s)
            new_stamps.append(t)
            new_users.append(u)
        seqs, stamps, users = new_seqs, new_stamps, new_users
        if not changed:
            break
    if not seqs:
        raise EmptyDatasetError(f"no interactions survive the {min_count}-core filter")
    kept = np.unique(np.concatenate(seqs))
    remap = np.zeros(log_.num_items + 1, dtype=np.int64)
    remap[kept] = np.arange(1, len(kept) + 1)
    return InteractionLog(
        [log_.user_names[u] for u in users],
        [log_.item_names[i - 1] for i in kept],
        [remap[s] for s in seqs],
        stamps,
    )


@dataclass
class SequenceSample:
    """One training sequence; position t of ``target_ids`` is the item after ``input_ids[t]``."""

    user: int
    input_ids: np.ndarray
    target_ids: np.ndarray
    loss_mask: np.ndarray


@dataclass
class EvalCase:
    user: int
    input_ids: np.ndarray
    target: int
    prefix: np.ndarray  # every item before the target, untruncated


@dataclass
class DatasetSplits:
    num_items: int
    max_len: int
    train: list[SequenceSample]
    valid: list[EvalCase]
    test: list[EvalCase]
    popularity: np.ndarray  # counts over training interactions, index = item id
    histories: list[np.ndarray]  # full sorted-unique item set per user
    skipped_users: int = 0
    user_names: list[str] = field(default_factory=list)

    def cases(self, split: str) -> list[EvalCase]:
        if split not in ("valid", "test"):
            raise InvalidArgumentError(f"unknown split {split!r}")
        return self.valid if split == "valid" else self.test


def left_pad(items: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    tail = np.asarray(items, dtype=np.int64)[-n:] if n else np.zeros(0, np.int64)
    if len(tail):
        out[n - len(tail):] = tail
    return out


def split_leave_one_out(log_: InteractionLog, max_len: int) -> DatasetSplits:
    """Last item per user is the test target, the one before it the validation target."""
    if max_len < 1:
        raise InvalidArgumentError("max_len must be >= 1")
    train, valid, test, histories = [], [], [], []
    popularity = np.zeros(log_.num_items + 1, dtype=np.int64)
    skipped = 0
    for u, seq in enumerate(log_.sequences):
        histories.append(np.unique(seq))
        if len(seq) < 3:
            skipped += 1
            continue
        usable = seq[:-2]
        np.add.at(popularity, usable, 1)
        if len(usable) >= 2:
            inputs = left_pad(usable[:-1], max_len)
            targets = left_pad(usable[1:], max_len)
            train.append(SequenceSample(u, inputs, targets, targets > 0))
        valid.append(EvalCase(u, left_pad(seq[:-2], max_len), int(seq[-2]), seq[:-2].copy()))
        test.append(EvalCase(u, left_pad(seq[:-1], max_len), int(seq[-1]), seq[:-1].copy()))
    if skipped:
        log.warning("skipped %d users with fewer than 3 interactions", skipped)
    return DatasetSplits(
        log_.num_items, max_len, train, valid, test, popularity, histories, skipped,
        list(log_.user_names),
    )


def sample_train_negative(rng: Rng, history, vocab: int) -> int:
    """Uniform item from ``1..vocab`` outside ``history`` (rejection sampling)."""
    hist = set(int(i) for i in history)
    if len(hist & set(range(1, vocab + 1))) >= vocab:
        raise InvalidArgumentError("every item is in the history; no negative exists")
    while True:
        item = int(rng.integers(1, vocab + 1))
        if item not in hist:
            return item


def sample_train_negatives(rng: Rng, history: np.ndarray, vocab: int, size: int) -> np.ndarray:
    """``size`` independent uniform negatives outside the sorted ``history``."""
    if len(history) >= vocab:
        raise InvalidArgumentError("every item is in the history; no negative exists")
    out = rng.integers(1, vocab + 1, size=size)
    bad = np.isin(out, history)
    while bad.any():
        out[bad] = rng.integers(1, vocab + 1, size=int(bad.sum()))
        bad = np.isin(out, history)
    return out


def sample_eval_negatives(rng: Rng, history, vocab: int, count: int = 99) -> np.ndarray:
    """``count`` distinct items the user never interacted with."""
    pool = np.setdiff1d(np.arange(1, vocab + 1), np.asarray(history, dtype=np.int64))
    if len(pool) < count:
        raise InvalidArgumentError(f"only {len(pool)} candidate negatives, need {count}")
    return rng.choice(pool, size=count, replace=False)


@dataclass
class Batch:
    indices: np.ndarray
    users: np.ndarray
    input_ids: np.ndarray
    target_ids: np.ndarray
    loss_mask: np.ndarray


def batch_iter(
    samples: Sequence[SequenceSample], batch_size: int, rng: Rng | None = None, shuffle: bool = False
) -> Iterator[Batch]:
    if batch_size < 1:
        raise InvalidArgumentError("batch_size must be >= 1")
    order = np.arange(len(samples))
    if shuffle:
        if rng is None:
            raise InvalidArgumentError("shuffling needs an Rng")
        order = rng.permutation(len(samples))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        chunk = [samples[i] for i in idx]
        yield Batch(
            idx,
            np.array([s.user for s in chunk], dtype=np.int64),
            np.stack([s.input_ids for s in chunk]),
            np.stack([s.target_ids for s in chunk]),
            np.stack([s.loss_mask for s in chunk]),
        )


def save_log(log_: InteractionLog, path, meta: dict[str, str] | None = None) -> None:
    """Write a processed log as a versioned binary cache."""
    lengths = np.array([len(s) for s in log_.sequences], dtype=np.int64)
    arrays = {
        "lengths": lengths,
        "items": np.concatenate(log_.sequences) if log_.sequences else np.zeros(0, np.int64),
        "timestamps": np.concatenate(log_.timestamps) if log_.timestamps else np.zeros(0, np.int64),
        "user_names": np.frombuffer("\n".join(log_.user_names).encode(), dtype=np.uint8),
        "item_names": np.frombuffer("\n".join(log_.item_names).encode(), dtype=np.uint8),
    }
    info = {"kind": "interaction_log", "users": str(log_.num_users), "items": str(log_.num_items)}
    info.update(meta or {})
    serialization.dump(path, CACHE_MAGIC, info, arrays)


def load_log(path) -> tuple[InteractionLog, dict[str, str]]:
    if not Path(path).exists():
        raise FileNotFoundError(f"dataset cache not found: {path}")
    meta, arrays = serialization.load(path, CACHE_MAGIC)
    bounds = np.cumsum(arrays["lengths"])[:-1]
    users = bytes(arrays["user_names"]).decode().split("\n")
    items = bytes(arrays["item_names"]).decode().split("\n")
    log_ = InteractionLog(
        users,
        items,
        list(np.split(arrays["items"], bounds)),
        list(np.split(arrays["timestamps"], bounds)),
    )
    return log_, meta
