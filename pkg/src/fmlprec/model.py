"""The filter-enhanced all-MLP recommender: embedding layer, filter blocks, scoring."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import InvalidArgumentError
from .layers import (
    EmbeddingTable,
    FilterBank,
    LayerNormParams,
    classical_filter_layer,
    embed_sequence,
    ffn,
    filter_layer,
)
from .rng import Rng, init_normal
from .spectral import FilterKind
from .tensor import Tensor, no_grad, rowdot, take_rows

MIXERS = ("learnable", "none")


@dataclass
class ModelConfig:
    vocab_size: int
    hidden_size: int = 64
    max_len: int = 50
    num_blocks: int = 2
    d_ff: int | None = None
    dropout: float = 0.5
    init_std: float = 0.02
    seed: int = 0
    # "learnable" is the full model; "none" drops the filter sub-layer (all-MLP variants)
    mixer: str = "learnable"
    # optional fixed mask applied right after the embedding layer
    pre_filter: str = "allpass"

    def __post_init__(self):
        if self.d_ff is None:
            self.d_ff = 4 * self.hidden_size
        for name in ("vocab_size", "hidden_size", "max_len", "d_ff"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.num_blocks < 0:
            raise InvalidArgumentError("num_blocks must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgumentError("dropout must lie in [0, 1)")
        if self.mixer not in MIXERS:
            raise InvalidArgumentError(f"mixer must be one of {MIXERS}")
        self.pre_filter = FilterKind(self.pre_filter).value

    @property
    def num_bins(self) -> int:
        return self.max_len // 2 + 1

    def to_dict(self) -> dict[str, str]:
        return {k: str(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "ModelConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in types:
                continue
            t = str(types[k])
            if "int" in t:
                kwargs[k] = int(v)
            elif "float" in t:
                kwargs[k] = float(v)
            else:
                kwargs[k] = v
        return cls(**kwargs)


def expected_num_params(cfg: ModelConfig) -> int:
    d, n, ff, k = cfg.hidden_size, cfg.max_len, cfg.d_ff, cfg.num_bins
    per_block = 2 * ff * d + ff + d + 2 * d
    if cfg.mixer == "learnable":
        per_block += 2 * k * d + 2 * d
    return (cfg.vocab_size + 1) * d + n * d + 2 * d + cfg.num_blocks * per_block


@dataclass
class Block:
    bank: FilterBank | None
    filter_norm: LayerNormParams | None
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ffn_norm: LayerNormParams


class FmlpModel:
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = Rng(config.seed)
        d, std = config.hidden_size, config.init_std
        self.embedding = EmbeddingTable(
            init_normal(rng, (config.vocab_size + 1, d), std, "item_embedding")
        )
        self.positions = init_normal(rng, (config.max_len, d), std, "position_embedding")
        self.embed_norm = LayerNormParams.identity(d)
        self.blocks: list[Block] = []
        for _ in range(config.num_blocks):
            bank = norm = None
            if config.mixer == "learnable":
                bank = FilterBank(
                    init_normal(rng, (config.num_bins, d), std),
                    init_normal(rng, (config.num_bins, d), std),
                )
                norm = LayerNormParams.identity(d)
            self.blocks.append(
                Block(
                    bank,
                    norm,
                    init_normal(rng, (d, config.d_ff), std),
                    Tensor(np.zeros(config.d_ff), requires_grad=True),
                    init_normal(rng, (config.d_ff, d), std),
                    Tensor(np.zeros(d), requires_grad=True),
                    LayerNormParams.identity(d),
                )
            )
        for name, t in self.named_parameters().items():
            t.name = name

    def named_parameters(self) -> dict[str, Tensor]:
        params = {
            "item_embedding": self.embedding.weights,
            "position_embedding": self.positions,
            "embed_norm.gamma": self.embed_norm.gamma,
            "embed_norm.beta": self.embed_norm.beta,
        }
        for i, b in enumerate(self.blocks):
            p = f"blocks.{i}."
            if b.bank is not None:
                params[p + "filter.w_re"] = b.bank.w_re
                params[p + "filter.w_im"] = b.bank.w_im
                params[p + "filter_norm.gamma"] = b.filter_norm.gamma
                params[p + "filter_norm.beta"] = b.filter_norm.beta
            params[p + "ffn.w1"] = b.w1
            params[p + "ffn.b1"] = b.b1
            params[p + "ffn.w2"] = b.w2
            params[p + "ffn.b2"] = b.b2
            params[p + "ffn_norm.gamma"] = b.ffn_norm.gamma
            params[p + "ffn_norm.beta"] = b.ffn_norm.beta
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_params(self) -> int:
        return sum(t.size for t in self.parameters())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.named_parameters().items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(arrays) != set(params):
            missing = set(params) ^ set(arrays)
            raise InvalidArgumentError(f"parameter names differ: {sorted(missing)}")
        for k, t in params.items():
            if arrays[k].shape != t.shape:
                raise InvalidArgumentError(f"shape mismatch for {k}")
            t.data[...] = arrays[k]

    def forward(self, ids, train: bool = False, rng: Rng | None = None) -> Tensor:
        """Hidden states of the last block for left-padded ids ``[..., n]``."""
        cfg = self.config
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim == 0 or ids.shape[-1] != cfg.max_len:
            raise InvalidArgumentError(f"expected sequences of length {cfg.max_len}")
        p = cfg.dropout
        h = embed_sequence(ids, self.embedding, self.positions, self.embed_norm, p, rng, train)
        h = classical_filter_layer(h, cfg.pre_filter)
        for b in self.blocks:
            if b.bank is not None:
                h = filter_layer(h, b.bank, b.filter_norm, p, rng, train)
            h = ffn(h, b.w1, b.b1, b.w2, b.b2, b.ffn_norm, p, rng, train)
        return h

    def score_items(self, hidden: Tensor, items) -> Tensor:
        """Differentiable ``<e_item, hidden>`` for item ids broadcast against hidden[..., :]."""
        return rowdot(hidden, take_rows(self.embedding.weights, items))

    def score(self, hidden_t, item: int) -> float:
        if not 1 <= item <= self.config.vocab_size:
            raise InvalidArgumentError(f"item {item} outside [1, {self.config.vocab_size}]")
        h = hidden_t.data if isinstance(hidden_t, Tensor) else np.asarray(hidden_t)
        return float(np.sum(self.embedding.weights.data[item] * h))

    def score_all(self, hidden_t) -> np.ndarray:
        """Scores of items 1..|I| (index ``j`` holds item ``j + 1``).

        Uses the same per-row reduction as :meth:`score`, so the two agree
        bit for bit; batched ranking goes through :meth:`score_full`.
        """
        h = hidden_t.data if isinstance(hidden_t, Tensor) else np.asarray(hidden_t)
        if h.ndim != 1:
            raise InvalidArgumentError("score_all expects a single hidden vector")
        return np.sum(self.embedding.weights.data[1:] * h, axis=-1)

    # scorer interface used by evaluation
    def last_hidden(self, input_ids) -> np.ndarray:
        with no_grad():
            return self.forward(input_ids, train=False).data[..., -1, :]

    def score_candidates(self, input_ids, candidates) -> np.ndarray:
        h = self.last_hidden(input_ids)
        emb = self.embedding.weights.data[np.asarray(candidates)]
        return np.einsum("bcd,bd->bc", emb, h)

    def score_full(self, input_ids) -> np.ndarray:
        return self.last_hidden(input_ids) @ self.embedding.weights.data[1:].T
