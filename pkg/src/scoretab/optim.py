"""Adam optimizer and exponential moving average over named parameter dicts."""

from __future__ import annotations

import numpy as np

from .network import Parameters


class Adam:
    """Standard Adam with bias correction, acting in place on Parameters."""

    def __init__(self, params: Parameters, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = params.zeros_like()
        self.u = params.zeros_like()

    def step(self, params: Parameters, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, value in params.values.items():
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.u[name] = b2 * self.u[name] + (1.0 - b2) * g * g
            mhat = self.m[name] / bc1
            uhat = self.u[name] / bc2
            value -= self.learning_rate * mhat / (np.sqrt(uhat) + self.eps)


class Ema:
    """Exponential moving average of parameters; decay 0 tracks them exactly."""

    def __init__(self, params: Parameters, decay: float):
        if not (0.0 <= decay < 1.0):
            raise ValueError("ema decay must lie in [0, 1)")
        self.decay = decay
        self.shadow = params.copy()

    def update(self, params: Parameters) -> None:
        d = self.decay
        for name, value in params.values.items():
            self.shadow.values[name] = d * self.shadow.values[name] + (1.0 - d) * value
