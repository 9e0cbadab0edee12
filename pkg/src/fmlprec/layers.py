"""Model building blocks: embedding layer, LayerNorm, dropout, filter layers, FFN.

All layers take inputs shaped ``[..., n, d]`` (sequence axis second to last)
so a batch of sequences runs through one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .rng import Rng
from .spectral import FilterKind, irfft_along, make_mask, rfft_along
from .tensor import Tensor, add, make_op, matmul, mul, relu, take_rows, _unbroadcast

LAYERNORM_EPS = 1e-12


@dataclass
class EmbeddingTable:
    """Item embeddings; row 0 is the padding item."""

    weights: Tensor

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class FilterBank:
    """Complex filter over the ``n//2 + 1`` real-FFT bins, one column per feature."""

    w_re: Tensor
    w_im: Tensor

    def __post_init__(self):
        if self.w_re.shape != self.w_im.shape:
            raise InvalidArgumentError("real and imaginary filter parts differ in shape")

    @property
    def num_bins(self) -> int:
        return self.w_re.shape[0]

    def complex_weights(self) -> np.ndarray:
        return self.w_re.data + 1j * self.w_im.data


@dataclass
class LayerNormParams:
    gamma: Tensor
    beta: Tensor
    eps: float = LAYERNORM_EPS

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgumentError("LayerNorm epsilon must be positive")

    @classmethod
    def identity(cls, d: int, prefix: str = "") -> "LayerNormParams":
        return cls(
            Tensor(np.ones(d), requires_grad=True, name=f"{prefix}gamma"),
            Tensor(np.zeros(d), requires_grad=True, name=f"{prefix}beta"),
        )


def layernorm(x: Tensor, p: LayerNormParams) -> Tensor:
    """Standardize over the last axis, then scale by gamma and shift by beta."""
    d = x.shape[-1]
    if d < 1:
        raise InvalidArgumentError("LayerNorm needs at least one feature")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + p.eps)
    xhat = centered * inv_std
    gamma, beta = p.gamma, p.beta

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        g_gamma = np.sum(g * xhat, axis=lead)
        g_beta = np.sum(g, axis=lead)
        gx_hat = g * gamma.data
        gx = inv_std * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * np.mean(gx_hat * xhat, axis=-1, keepdims=True)
        )
        return gx, g_gamma, g_beta

    return make_op(xhat * gamma.data + beta.data, (x, gamma, beta), backward)


def dropout(x: Tensor, p: float, rng: Rng | None, train: bool) -> Tensor:
    """Inverted dropout; the identity in eval mode or when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise InvalidArgumentError(f"dropout rate {p} outside [0, 1)")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise InvalidArgumentError("train-mode dropout needs an Rng")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return mul(x, Tensor(keep))


def embed_sequence(
    ids,
    table: EmbeddingTable,
    pos: Tensor,
    norm: LayerNormParams,
    drop_p: float,
    rng: Rng | None,
    train: bool,
) -> Tensor:
    """``Dropout(LayerNorm(item_embedding[ids] + position_embedding))``."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() > table.vocab_size):
        raise InvalidArgumentError(f"item id outside [0, {table.vocab_size}]")
    if ids.shape[-1] != pos.shape[0]:
        raise InvalidArgumentError(f"sequence length {ids.shape[-1]} != {pos.shape[0]}")
    h = add(take_rows(table.weights, ids), pos)
    return dropout(layernorm(h, norm), drop_p, rng, train)


def _bin_scale(n: int, k: int) -> np.ndarray:
    # bins other than DC and Nyquist stand for a conjugate pair
    scale = np.full(k, 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    return scale


def spectral_filter(x: Tensor, w_re: Tensor, w_im: Tensor) -> Tensor:
    """``irfft(W * rfft(x))`` along the sequence axis (-2), per feature column.

    Equivalent to circularly convolving each column with ``irfft`` of its
    filter. The backward pass uses the adjoint: the input gradient is the
    filtering of the output gradient with ``conj(W)``.
    """
    n = x.shape[-2]
    k = n // 2 + 1
    if w_re.shape[0] != k:
        raise InvalidArgumentError(f"filter has {w_re.shape[0]} bins, length {n} needs {k}")
    spec = rfft_along(x.data, axis=-2)
    # imaginary parts of the self-conjugate bins cannot reach a real output
    real_bins = _bin_scale(n, k) == 1.0
    w_imag = np.where(real_bins[:, None], 0.0, w_im.data)
    w = w_re.data + 1j * w_imag
    y = irfft_along(spec * w, n, axis=-2)

    def backward(g):
        g_spec = rfft_along(g, axis=-2)
        gx = irfft_along(np.conj(w) * g_spec, n, axis=-2) if x.requires_grad else None
        gw_re = gw_im = None
        if w_re.requires_grad or w_im.requires_grad:
            c = np.conj(g_spec) * spec * (_bin_scale(n, k)[:, None] / n)
            gw_re = _unbroadcast(c.real, w_re.shape)
            gw_im = _unbroadcast(np.where(real_bins[:, None], 0.0, -c.imag), w_im.shape)
        return gx, gw_re, gw_im

    return make_op(y, (x, w_re, w_im), backward)


def filter_layer(
    x: Tensor,
    bank: FilterBank,
    norm: LayerNormParams,
    drop_p: float,
    rng: Rng | None,
    train: bool,
) -> Tensor:
    """Learnable filter sub-layer: ``LayerNorm(x + Dropout(filtered(x)))``."""
    n = x.shape[-2]
    if bank.num_bins != n // 2 + 1:
        raise InvalidArgumentError(f"filter bank built for a different length than {n}")
    filtered = spectral_filter(x, bank.w_re, bank.w_im)
    return layernorm(add(x, dropout(filtered, drop_p, rng, train)), norm)


def classical_filter_layer(x: Tensor, kind: FilterKind | str) -> Tensor:
    """Apply a fixed 0/1 frequency mask to every feature column.

    The all-pass mask returns ``x`` itself, so a model with it is identical
    to one without a filter.
    """
    kind = FilterKind(kind)
    if kind is FilterKind.ALL_PASS:
        return x
    n = x.shape[-2]
    mask = make_mask(kind, n // 2 + 1).weights[:, None]
    return spectral_filter(x, Tensor(mask), Tensor(np.zeros_like(mask)))


def ffn(
    x: Tensor,
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
    norm: LayerNormParams,
    drop_p: float,
    rng: Rng | None,
    train: bool,
) -> Tensor:
    """Point-wise feed-forward sub-layer with residual add and LayerNorm."""
    d = x.shape[-1]
    if w1.shape[0] != d or w2.shape != (w1.shape[1], d) or b1.shape != (w1.shape[1],) or b2.shape != (d,):
        raise InvalidArgumentError("feed-forward parameter shapes do not match the input")
    inner = relu(add(matmul(x, w1), b1))
    out = add(matmul(inner, w2), b2)
    return layernorm(add(x, dropout(out, drop_p, rng, train)), norm)
