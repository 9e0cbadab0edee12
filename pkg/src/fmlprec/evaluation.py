"""Ranking metrics and the sampled / full-ranking evaluation protocols.

A scorer is any object with ``score_candidates(input_ids, candidates)``
returning ``[B, C]`` scores and ``score_full(input_ids)`` returning ``[B, |I|]``
scores for items ``1..|I|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DatasetSplits, sample_eval_negatives
from .errors import InvalidArgumentError
from .rng import Rng

SAMPLED_HR_KS = (1, 5, 10)
SAMPLED_NDCG_KS = (5, 10)
FULL_KS = (5, 10, 20)
NUM_EVAL_NEGATIVES = 99
_SPLIT_CODE = {"valid": 1, "test": 2}


def rank_of_target(scores, target_index: int) -> int:
    """1-based rank; candidates tied with the target count as ranked ahead of it."""
    scores = np.asarray(scores, dtype=np.float64)
    t = scores[target_index]
    return int(np.sum(scores >= t))


def metrics_from_rank(rank: int, hr_ks=SAMPLED_HR_KS, ndcg_ks=SAMPLED_NDCG_KS) -> dict[str, float]:
    if rank < 1:
        raise InvalidArgumentError("rank must be >= 1")
    out = {f"HR@{k}": float(rank <= k) for k in hr_ks}
    out.update({f"NDCG@{k}": (1.0 / math.log2(rank + 1) if rank <= k else 0.0) for k in ndcg_ks})
    out["MRR"] = 1.0 / rank
    return out


@dataclass
class EvalReport:
    protocol: str
    metrics: dict[str, float]
    ranks: list[tuple[int, int]] = field(default_factory=list)
    seed: int | None = None
    split: str = "test"

    def to_text(self) -> str:
        lines = [f"protocol={self.protocol}", f"split={self.split}", f"seed={self.seed}",
                 f"users={len(self.ranks)}"]
        lines += [f"{k}={v:.6f}" for k, v in self.metrics.items()]
        return "\n".join(lines) + "\n"

    def write(self, path, ranks_path=None) -> None:
        Path(path).write_text(self.to_text())
        if ranks_path:
            Path(ranks_path).write_text("".join(f"{u}\t{r}\n" for u, r in self.ranks))


def aggregate(ranks: list[tuple[int, int]], hr_ks, ndcg_ks) -> dict[str, float]:
    if not ranks:
        raise InvalidArgumentError("no users to evaluate")
    totals: dict[str, float] = {}
    for _, r in ranks:
        for k, v in metrics_from_rank(r, hr_ks, ndcg_ks).items():
            totals[k] = totals.get(k, 0.0) + v
    return {k: v / len(ranks) for k, v in totals.items()}


def eval_negatives(splits: DatasetSplits, user: int, seed: int, split: str) -> np.ndarray:
    """The 99 negatives of one user, a pure function of (seed, user, split)."""
    rng = Rng.derive(seed, user, _SPLIT_CODE[split])
    return sample_eval_negatives(rng, splits.histories[user], splits.num_items, NUM_EVAL_NEGATIVES)


def evaluate_sampled(
    scorer, splits: DatasetSplits, seed: int = 0, split: str = "test", batch_size: int = 512
) -> EvalReport:
    """Rank each target against 99 sampled items the user never interacted with."""
    cases = splits.cases(split)
    ranks = []
    for start in range(0, len(cases), batch_size):
        chunk = cases[start:start + batch_size]
        cands = np.stack([
            np.concatenate(([c.target], eval_negatives(splits, c.user, seed, split)))
            for c in chunk
        ])
        scores = scorer.score_candidates(np.stack([c.input_ids for c in chunk]), cands)
        ranks += [(c.user, rank_of_target(s, 0)) for c, s in zip(chunk, scores)]
    return EvalReport("sampled99", aggregate(ranks, SAMPLED_HR_KS, SAMPLED_NDCG_KS), ranks, seed, split)


def evaluate_full(
    scorer, splits: DatasetSplits, mask_history: bool = True, split: str = "test",
    batch_size: int = 256,
) -> EvalReport:
    """Rank each target against the whole vocabulary.

    With ``mask_history`` the items preceding the target in the user's
    sequence (other than the target itself) are removed from the candidates.
    """
    cases = splits.cases(split)
    ranks = []
    for start in range(0, len(cases), batch_size):
        chunk = cases[start:start + batch_size]
        scores = scorer.score_full(np.stack([c.input_ids for c in chunk]))
        for c, s in zip(chunk, scores):
            keep = np.ones(len(s), dtype=bool)
            if mask_history:
                seen = np.unique(c.prefix)
                keep[seen[seen != c.target] - 1] = False
            target_score = s[c.target - 1]
            ranks.append((c.user, int(np.sum(s[keep] >= target_score))))
    return EvalReport("full", aggregate(ranks, FULL_KS, FULL_KS), ranks, None, split)


class PopularityScorer:
    """Scores every item by its number of training interactions."""

    def __init__(self, splits: DatasetSplits):
        self.counts = splits.popularity.astype(np.float64)

    def score_candidates(self, input_ids, candidates) -> np.ndarray:
        return self.counts[np.asarray(candidates)]

    def score_full(self, input_ids) -> np.ndarray:
        return np.tile(self.counts[1:], (len(input_ids), 1))


def popularity_baseline(splits: DatasetSplits) -> PopularityScorer:
    return PopularityScorer(splits)
