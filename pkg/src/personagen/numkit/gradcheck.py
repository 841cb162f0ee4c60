"""Central-difference gradient verification."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .tensor import Tape, Tensor, backward


def grad_check(fn: Callable[[], Tensor], params: list[Tensor], eps: float = 1e-4) -> float:
    """Compare reverse-mode gradients of ``fn`` against central differences.

    ``fn`` must be a deterministic closure over ``params`` returning a scalar
    tensor. Every entry of every listed parameter is perturbed by +/- eps.
    Returns max over entries of |analytic - numeric| / max(1e-8, |analytic|
    + |numeric|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    with Tape() as tape:
        loss = fn()
    if loss.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    grad_map = backward(loss, tape)

    worst = 0.0
    for pi, p in enumerate(params):
        analytic = grad_map.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        analytic_flat = np.asarray(analytic).reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + eps
            plus = _evaluate(fn, pi, j, "+")
            flat[j] = original - eps
            minus = _evaluate(fn, pi, j, "-")
            flat[j] = original
            numeric = (plus - minus) / (2.0 * eps)
            denom = max(1e-8, abs(analytic_flat[j]) + abs(numeric))
            worst = max(worst, abs(analytic_flat[j] - numeric) / denom)
    return worst


def _evaluate(fn: Callable[[], Tensor], param_index: int, entry_index: int, direction: str) -> float:
    try:
        value = fn().item()
    except FloatingPointError as err:
        raise FloatingPointError(
            f"non-finite value while perturbing param {param_index} entry {entry_index} ({direction}eps)"
        ) from err
    if not math.isfinite(value):
        raise FloatingPointError(
            f"non-finite value while perturbing param {param_index} entry {entry_index} ({direction}eps)"
        )
    return value
