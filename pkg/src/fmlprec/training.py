"""Pairwise ranking loss, Adam, the epoch loop, early stopping and checkpoints."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import serialization
from .data import DatasetSplits, batch_iter, sample_train_negatives
from .errors import FormatError, InvalidArgumentError, TrainingAbortedError
from .evaluation import evaluate_sampled
from .model import FmlpModel, ModelConfig
from .rng import Rng
from .tensor import Tensor, add, make_op, neg, softplus

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FMLPCKPT"
TARGET_MODES = ("all_positions", "last_only")


@dataclass
class TrainConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    target_mode: str = "all_positions"
    eval_seed: int = 0

    def __post_init__(self):
        if not self.lr >= 0:
            raise InvalidArgumentError("lr must be non-negative")
        if self.patience < 1 or self.batch_size < 1:
            raise InvalidArgumentError("patience and batch_size must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidArgumentError("Adam betas must lie in (0, 1)")
        if self.target_mode not in TARGET_MODES:
            raise InvalidArgumentError(f"target_mode must be one of {TARGET_MODES}")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def bpr_loss(pos: Tensor, neg_scores: Tensor, mask, reduction: str = "mean") -> Tensor:
    """``-log sigmoid(pos - neg)`` over masked positions, as ``softplus(neg - pos)``."""
    mask = np.asarray(mask, dtype=bool)
    if pos.shape != neg_scores.shape or mask.shape != pos.shape:
        raise InvalidArgumentError("score and mask shapes differ")
    count = int(mask.sum())
    if count == 0:
        raise InvalidArgumentError("loss mask selects no positions")
    per_pos = softplus(add(neg_scores, neg(pos)))
    weight = mask / count if reduction == "mean" else mask.astype(np.float64)
    return make_op(
        np.sum(per_pos.data * weight), (per_pos,), lambda g: (g * weight,)
    )


def adam_step(params: dict[str, Tensor], state: AdamState, cfg: TrainConfig) -> None:
    """Bias-corrected Adam update of every parameter that has a gradient."""
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise TrainingAbortedError(f"non-finite gradient in {name} at step {state.step + 1}")
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p.data -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_epsilon)


@dataclass
class EpochStats:
    loss: float
    seconds: float
    positions: int


def batch_loss(model: FmlpModel, batch, negatives: np.ndarray, mask: np.ndarray,
               train: bool, rng: Rng | None, reduction: str = "mean") -> Tensor:
    hidden = model.forward(batch.input_ids, train=train, rng=rng)
    pos = model.score_items(hidden, batch.target_ids)
    neg_s = model.score_items(hidden, negatives)
    return bpr_loss(pos, neg_s, mask, reduction)


def _target_mask(batch, mode: str) -> np.ndarray:
    if mode == "all_positions":
        return batch.loss_mask
    mask = np.zeros_like(batch.loss_mask)
    mask[:, -1] = batch.loss_mask[:, -1]
    return mask


def _epoch_negatives(batch, splits: DatasetSplits, mask: np.ndarray, rng: Rng) -> np.ndarray:
    negs = np.zeros_like(batch.target_ids)
    for row, user in enumerate(batch.users):
        cols = np.flatnonzero(mask[row])
        negs[row, cols] = sample_train_negatives(rng, splits.histories[user], splits.num_items, len(cols))
    return negs


def run_epoch(model: FmlpModel, splits: DatasetSplits, cfg: TrainConfig, epoch: int,
              state: AdamState | None = None, update: bool = True) -> EpochStats:
    """One pass over the training samples; randomness is keyed by (seed, epoch).

    With ``update=False`` the same batches and negatives are scored without
    dropout and without touching the parameters.
    """
    if not splits.train:
        raise InvalidArgumentError("no training samples")
    rng = Rng.derive(cfg.seed, epoch)
    params = model.named_parameters()
    start = time.perf_counter()
    total, count = 0.0, 0
    for batch in batch_iter(splits.train, cfg.batch_size, rng, shuffle=True):
        mask = _target_mask(batch, cfg.target_mode)
        if not mask.any():
            continue
        negatives = _epoch_negatives(batch, splits, mask, rng)
        loss = batch_loss(model, batch, negatives, mask, update, rng, reduction="sum")
        if not np.isfinite(loss.data):
            raise TrainingAbortedError(f"non-finite loss in epoch {epoch}")
        n = int(mask.sum())
        total += float(loss.data)
        count += n
        if update:
            for p in params.values():
                p.zero_grad()
            (loss * (1.0 / n)).backward()
            adam_step(params, state, cfg)
    return EpochStats(total / max(count, 1), time.perf_counter() - start, count)


def train_epoch(model, splits, cfg, epoch: int, state: AdamState) -> EpochStats:
    return run_epoch(model, splits, cfg, epoch, state, update=True)


def evaluate_loss(model, splits, cfg, epoch: int) -> float:
    return run_epoch(model, splits, cfg, epoch, update=False).loss


@dataclass
class TrainProgress:
    epoch: int = 0  # epochs completed
    best_epoch: int = 0
    best_mrr: float = -1.0
    bad_epochs: int = 0
    history: list[tuple[int, float, float, float]] = field(default_factory=list)
    stopped: bool = False


@dataclass
class FitResult:
    best_state: dict[str, np.ndarray]
    best_adam: AdamState
    progress: TrainProgress
    last_adam: AdamState

    @property
    def history(self):
        return self.progress.history


def _copy_adam(s: AdamState) -> AdamState:
    return AdamState({k: v.copy() for k, v in s.m.items()}, {k: v.copy() for k, v in s.v.items()}, s.step)


def fit(
    model: FmlpModel,
    splits: DatasetSplits,
    cfg: TrainConfig,
    state: AdamState | None = None,
    progress: TrainProgress | None = None,
    history_path=None,
    on_epoch=None,
    validate=None,
    best_state: dict[str, np.ndarray] | None = None,
) -> FitResult:
    """Train with early stopping on validation MRR; the model ends at its best epoch.

    ``validate(model) -> (mrr, ndcg10)`` defaults to the sampled protocol on
    the validation split. ``state``/``progress`` resume an earlier run and
    ``best_state`` carries that run's best parameters.
    """
    state = state or AdamState()
    progress = progress or TrainProgress()
    if validate is None:
        def validate(m):
            rep = evaluate_sampled(m, splits, seed=cfg.eval_seed, split="valid")
            return rep.metrics["MRR"], rep.metrics["NDCG@10"]
    best_state = best_state if best_state is not None else model.state_arrays()
    best_adam = _copy_adam(state)
    if history_path and progress.epoch == 0:
        Path(history_path).write_text("epoch\tloss\tvalid_mrr\tvalid_ndcg10\n")
    while not progress.stopped and progress.epoch < cfg.max_epochs:
        epoch = progress.epoch + 1
        stats = train_epoch(model, splits, cfg, epoch, state)
        mrr, ndcg = validate(model)
        progress.epoch = epoch
        progress.history.append((epoch, stats.loss, mrr, ndcg))
        if history_path:
            with open(history_path, "a") as fh:
                fh.write(f"{epoch}\t{stats.loss:.6f}\t{mrr:.6f}\t{ndcg:.6f}\n")
        log.info("epoch %d loss %.5f valid MRR %.4f NDCG@10 %.4f (%.1fs)",
                 epoch, stats.loss, mrr, ndcg, stats.seconds)
        if mrr > progress.best_mrr:
            progress.best_mrr, progress.best_epoch, progress.bad_epochs = mrr, epoch, 0
            best_state = model.state_arrays()
            best_adam = _copy_adam(state)
        else:
            progress.bad_epochs += 1
            if progress.bad_epochs >= cfg.patience:
                progress.stopped = True
        if on_epoch is not None:
            on_epoch(model, state, progress)
    last_adam = _copy_adam(state)
    model.load_state_arrays(best_state)
    return FitResult(best_state, best_adam, progress, last_adam)


def save_checkpoint(path, model: FmlpModel, state: AdamState | None = None,
                    progress: TrainProgress | None = None,
                    train_cfg: TrainConfig | None = None,
                    params: dict[str, np.ndarray] | None = None) -> None:
    """Write parameters, optimizer moments, progress and configs bit-exactly."""
    meta = {f"model.{k}": v for k, v in model.config.to_dict().items()}
    if train_cfg is not None:
        meta.update({f"train.{k}": str(v) for k, v in asdict(train_cfg).items()})
    arrays = {f"param.{k}": v for k, v in (params or model.state_arrays()).items()}
    if state is not None:
        meta["adam.step"] = str(state.step)
        arrays.update({f"adam.m.{k}": v for k, v in state.m.items()})
        arrays.update({f"adam.v.{k}": v for k, v in state.v.items()})
    if progress is not None:
        meta.update({
            "progress.epoch": str(progress.epoch),
            "progress.best_epoch": str(progress.best_epoch),
            "progress.best_mrr": repr(progress.best_mrr),
            "progress.bad_epochs": str(progress.bad_epochs),
            "progress.stopped": str(int(progress.stopped)),
        })
        arrays["history"] = np.array(progress.history, dtype=np.float64).reshape(-1, 4)
    serialization.dump(path, CHECKPOINT_MAGIC, meta, arrays)


@dataclass
class Checkpoint:
    model: FmlpModel
    state: AdamState | None
    progress: TrainProgress | None
    train_config: TrainConfig | None
    meta: dict[str, str]


def _train_config_from(meta: dict[str, str]) -> TrainConfig | None:
    raw = {k[6:]: v for k, v in meta.items() if k.startswith("train.")}
    if not raw:
        return None
    kwargs = {}
    for f in fields(TrainConfig):
        if f.name in raw:
            t = str(f.type)
            kwargs[f.name] = int(raw[f.name]) if t == "int" else float(raw[f.name]) if t == "float" else raw[f.name]
    return TrainConfig(**kwargs)


def load_checkpoint(path) -> Checkpoint:
    """Inverse of :func:`save_checkpoint`; raises :class:`FormatError` on a bad file."""
    if not Path(path).exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    meta, arrays = serialization.load(path, CHECKPOINT_MAGIC)

    try:
        cfg = ModelConfig.from_dict({k[6:]: v for k, v in meta.items() if k.startswith("model.")})
        model = FmlpModel(cfg)
        model.load_state_arrays({k[6:]: v for k, v in arrays.items() if k.startswith("param.")})
    except (TypeError, ValueError, KeyError) as exc:
        raise FormatError(f"inconsistent checkpoint contents: {exc}") from exc
    state = None
    if "adam.step" in meta:
        state = AdamState(
            {k[7:]: v for k, v in arrays.items() if k.startswith("adam.m.")},
            {k[7:]: v for k, v in arrays.items() if k.startswith("adam.v.")},
            int(meta["adam.step"]),
        )
    progress = None
    if "progress.epoch" in meta:
        progress = TrainProgress(
            int(meta["progress.epoch"]),
            int(meta["progress.best_epoch"]),
            float(meta["progress.best_mrr"]),
            int(meta["progress.bad_epochs"]),
            [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in arrays.get("history", [])],
            bool(int(meta["progress.stopped"])),
        )
    return Checkpoint(model, state, progress, _train_config_from(meta), meta)
