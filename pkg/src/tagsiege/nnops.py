"""Small shared numerics: init, activations, losses, Adam.

Everything here is plain numpy on float64 so results are bit-stable across
runs on the same platform.
"""

from __future__ import annotations

import numpy as np

from .errors import TrainingError


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_with_grad(
    logits: np.ndarray, labels: np.ndarray, rows: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the given rows, plus d(loss)/d(logits).

    The gradient is zero outside `rows`; inside it is (softmax - onehot) / m.
    """
    if rows.size == 0:
        raise TrainingError("loss requested over an empty node set")
    probs = softmax(logits[rows])
    picked = probs[np.arange(rows.size), labels[rows]]
    loss = float(-np.log(np.clip(picked, 1e-12, None)).mean())
    grad = np.zeros_like(logits)
    g = probs.copy()
    g[np.arange(rows.size), labels[rows]] -= 1.0
    grad[rows] = g / rows.size
    return loss, grad


class Adam:
    """Full-batch Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * (g * g)
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def check_finite(value: float, what: str) -> None:
    if not np.isfinite(value):
        raise TrainingError(f"{what} is not finite ({value})")
