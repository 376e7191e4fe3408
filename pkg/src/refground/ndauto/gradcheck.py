"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, nan_guard


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """Compare the analytic gradient of a scalar function against central differences.

    Returns ``max_i |analytic_i - numeric_i| / max(1, |numeric_i|)`` where
    ``numeric_i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)``. ``f`` must be
    deterministic; any non-finite intermediate raises, naming the op.
    """
    if not (1e-7 <= eps <= 1e-4):
        raise ValueError(f"eps {eps} outside [1e-7, 1e-4]")
    probe = Tensor(x.data.astype(np.float64), requires_grad=True)
    with nan_guard():
        y = f(probe)
    if y.size != 1:
        raise ValueError("grad_check requires a scalar-valued function")
    y.backward()
    analytic = probe.grad if probe.grad is not None else np.zeros_like(probe.data)

    flat = probe.data.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        base = flat[i]
        flat[i] = base + eps
        with nan_guard():
            hi = float(f(Tensor(probe.data.copy())).data)
        flat[i] = base - eps
        with nan_guard():
            lo = float(f(Tensor(probe.data.copy())).data)
        flat[i] = base
        numeric[i] = (hi - lo) / (2.0 * eps)

    numeric = numeric.reshape(probe.data.shape)
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom)) if numeric.size else 0.0
