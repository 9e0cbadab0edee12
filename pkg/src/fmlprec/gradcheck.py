"""Central-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, InvalidArgumentError
from .tensor import Tensor


def _value(f: Callable[[], Tensor | float]) -> float:
    out = f()
    v = float(out.data) if isinstance(out, Tensor) else float(out)
    if not np.isfinite(v):
        raise EvaluationError(f"function returned non-finite value {v}")
    return v


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    per_param: bool = False,
):
    """Largest relative error between backprop and central differences.

    ``f`` must rebuild its graph from ``params`` on every call and be
    deterministic. The error for one coordinate is
    ``|a - n| / max(1e-8, |a| + |n|)``. With ``per_param`` the result is a
    list with one maximum per parameter tensor.
    """
    if not 1e-6 <= h <= 1e-4:
        raise InvalidArgumentError(f"step {h} outside [1e-6, 1e-4]")
    for p in params:
        p.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise EvaluationError("function returned a non-finite value")
    out.backward()
    errors = []
    for p in params:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.flat
        worst = 0.0
        for i in range(p.data.size):
            orig = float(flat[i])
            flat[i] = orig + h
            up = _value(f)
            flat[i] = orig - h
            down = _value(f)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
        errors.append(worst)
    for p in params:
        p.zero_grad()
    return errors if per_param else max(errors, default=0.0)
