"""Finite-difference verification of the autodiff engine.

Central differences with step 1e-4 in float64, compared elementwise against
the reverse-mode gradient at relative tolerance 1e-4 (with a small absolute
floor where the analytic gradient vanishes).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from deskvoice.numcore.tensor import Tensor, backward


def finite_difference_gradient(
    loss_fn: Callable[[], Tensor], param: Tensor, step: float = 1e-4
) -> np.ndarray:
    """Central-difference gradient of ``loss_fn()`` w.r.t. every entry of ``param``."""
    base = param.data.copy()
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)
    data = param.data.reshape(-1)
    for i in range(data.size):
        orig = data[i]
        data[i] = orig + step
        hi = loss_fn().item()
        data[i] = orig - step
        lo = loss_fn().item()
        data[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    param.data = base
    return grad


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-4,
    rtol: float = 1e-4,
    atol: float = 1e-7,
) -> float:
    """Compare autodiff against central differences for every parameter.

    Returns the worst relative error over well-scaled entries and raises
    AssertionError when any entry exceeds ``atol + rtol * |fd|``.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    backward(loss, params=params)
    worst = 0.0
    for p in params:
        ad = p.grad if p.grad is not None else np.zeros_like(p.data)
        fd = finite_difference_gradient(loss_fn, p, step=step)
        diff = np.abs(ad - fd)
        bound = atol + rtol * np.abs(fd)
        if not np.all(diff <= bound):
            idx = np.unravel_index(np.argmax(diff - bound), diff.shape)
            raise AssertionError(
                f"gradient mismatch at {idx}: autodiff={ad[idx]:.8g} fd={fd[idx]:.8g} "
                f"(|diff|={diff[idx]:.3g}, allowed={bound[idx]:.3g})"
            )
        scaled = np.abs(fd) > 1e-5
        if scaled.any():
            worst = max(worst, float((diff[scaled] / np.abs(fd[scaled])).max()))
    return worst
