"""Huber loss, summed over all residual entries.

    L(r) = r^2 / 2                 if |r| <= delta
         = delta * (|r| - delta/2) otherwise

Both branches meet at |r| = delta with value delta^2/2 and slope delta, so
the loss is C^1 at the knot.
"""

from __future__ import annotations

import numpy as np


def huber_loss(residual: np.ndarray, delta: float) -> tuple[float, np.ndarray]:
    """Total Huber cost and its elementwise derivative w.r.t. the residual.

    Args:
        residual: array of residuals, any shape.
        delta: positive transition point between quadratic and linear regions.

    Returns:
        (value, grad) where grad has the shape of ``residual``.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    r = np.asarray(residual, dtype=np.float64)
    absr = np.abs(r)
    quad = absr <= delta
    value = float(np.sum(np.where(quad, 0.5 * r * r, delta * (absr - 0.5 * delta))))
    grad = np.where(quad, r, delta * np.sign(r))
    return value, grad
