"""Adam optimizer over a WeightSet, with bias correction.

    m_t = b1 * m_{t-1} + (1 - b1) * g
    v_t = b2 * v_{t-1} + (1 - b2) * g^2
    w  -= lr * (m_t / (1 - b1^t)) / (sqrt(v_t / (1 - b2^t)) + eps)
"""

from __future__ import annotations

import numpy as np

from .weights import WeightSet


class Adam:
    """Holds first/second moment estimates keyed like the weight params."""

    def __init__(
        self,
        weights: WeightSet,
        learning_rate: float = 0.003,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = weights.zeros_like()
        self.v = weights.zeros_like()

    def step(self, weights: WeightSet, grads: dict[str, np.ndarray]) -> WeightSet:
        """One update; returns a new WeightSet, leaves the input untouched."""
        if set(grads.keys()) != set(weights.params.keys()):
            raise ValueError("gradient keys do not match weight keys")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        new_params: dict[str, np.ndarray] = {}
        for key, w in weights.params.items():
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / bc1
            v_hat = self.v[key] / bc2
            new_params[key] = w - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return WeightSet(
            variant=weights.variant,
            input_dim=weights.input_dim,
            hidden_dim=weights.hidden_dim,
            output_dim=weights.output_dim,
            params=new_params,
        )
