"""Shared scaffolding for the from-scratch networks: seeded fan-in uniform
init, Adam updates, the minibatch loop with a 10% validation split and
early stopping, and param flatten/unflatten helpers for gradient checks.
"""

from __future__ import annotations

import numpy as np


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


def uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Adam:
    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             trainable: set[str] | None = None) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            if trainable is not None and key not in trainable:
                continue
            m = self.m.setdefault(key, np.zeros_like(g))
            v = self.v.setdefault(key, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[key] = params[key] - self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def flatten_params(params: dict[str, np.ndarray]) -> tuple[np.ndarray, list[tuple[str, tuple[int, ...]]]]:
    spec = [(k, params[k].shape) for k in sorted(params)]
    vec = np.concatenate([np.ravel(params[k]) for k, _ in spec]) if spec else np.empty(0)
    return vec, spec


def unflatten_params(vec: np.ndarray, spec: list[tuple[str, tuple[int, ...]]]) -> dict[str, np.ndarray]:
    out = {}
    pos = 0
    for key, shape in spec:
        size = int(np.prod(shape)) if shape else 1
        out[key] = vec[pos:pos + size].reshape(shape)
        pos += size
    return out


def train(
    params: dict[str, np.ndarray],
    loss_and_grad,
    loss_fn,
    X: np.ndarray,
    y: np.ndarray,
    learning_rate: float,
    batch_size: int,
    max_epochs: int,
    patience: int,
    seed: int,
    val_fraction: float = 0.1,
    trainable: set[str] | None = None,
) -> dict[str, np.ndarray]:
    """Adam minibatch training. With a validation split, stops after `patience`
    epochs without improvement and restores the best weights; without one
    (val_fraction <= 0), runs max_epochs and keeps the final weights."""
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    n_val = int(round(val_fraction * n)) if val_fraction > 0 else 0
    perm = rng.permutation(n)
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]
    if train_idx.size == 0:
        train_idx = perm
    adam = Adam(learning_rate)
    use_val = n_val >= 1
    best_val = np.inf
    best = {k: v.copy() for k, v in params.items()}
    bad = 0
    for _ in range(max_epochs):
        order = rng.permutation(train_idx)
        for start in range(0, order.size, batch_size):
            b = order[start:start + batch_size]
            loss, grads = loss_and_grad(params, X[b], y[b], rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss {loss}")
            adam.step(params, grads, trainable)
        if use_val:
            val = loss_fn(params, X[val_idx], y[val_idx])
            if not np.isfinite(val):
                raise TrainingDiverged(f"non-finite validation loss {val}")
            if val < best_val - 1e-12:
                best_val = val
                best = {k: v.copy() for k, v in params.items()}
                bad = 0
            else:
                bad += 1
                if bad >= patience:
                    break
    if use_val:
        return best
    return params
