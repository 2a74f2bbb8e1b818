"""One-hidden-layer feed-forward regressor: 48 relu units, dropout 0.6 on the
hidden activations (inverted scaling), linear output, mean-absolute-error
loss, trained with Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural

HIDDEN_UNITS = 48
DROPOUT = 0.6
MIN_ROWS = 500


def init_params(n_features: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "W1": neural.uniform_fan_in(rng, (n_features, hidden), n_features),
        "b1": np.zeros(hidden),
        "w2": neural.uniform_fan_in(rng, (hidden,), hidden),
        "b2": np.zeros(()),
    }


def forward(params: dict[str, np.ndarray], X: np.ndarray, mask: np.ndarray | None = None,
            keep: float = 1.0 - DROPOUT):
    a = X @ params["W1"] + params["b1"]
    h = np.maximum(a, 0.0)
    hd = h * mask / keep if mask is not None else h
    yhat = hd @ params["w2"] + params["b2"]
    return yhat, (a, hd)


def mae_loss(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray) -> float:
    yhat, _ = forward(params, X)
    return float(np.mean(np.abs(yhat - y)))


def loss_and_grad(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray,
                  rng: np.random.Generator | None, dropout: float = DROPOUT):
    keep = 1.0 - dropout
    mask = None
    if rng is not None and dropout > 0.0:
        mask = (rng.random((X.shape[0], params["b1"].size)) < keep).astype(float)
    yhat, (a, hd) = forward(params, X, mask, keep)
    resid = yhat - y
    loss = float(np.mean(np.abs(resid)))
    g = np.sign(resid) / X.shape[0]
    dw2 = hd.T @ g
    db2 = np.asarray(g.sum())
    dh = np.outer(g, params["w2"])
    if mask is not None:
        dh = dh * mask / keep
    da = dh * (a > 0.0)
    grads = {
        "W1": X.T @ da,
        "b1": da.sum(axis=0),
        "w2": dw2,
        "b2": db2,
    }
    return loss, grads


@dataclass(frozen=True)
class FfnnModel:
    params: dict[str, np.ndarray]
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected (n, {self.n_features}) input, got {X.shape}")
        yhat, _ = forward(self.params, X)
        return yhat


def fit_ffnn(
    X: np.ndarray,
    y: np.ndarray,
    hidden: int = HIDDEN_UNITS,
    dropout: float = DROPOUT,
    learning_rate: float = 1e-3,
    batch_size: int = 256,
    max_epochs: int = 200,
    patience: int = 10,
    seed: int = 0,
) -> FfnnModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] < MIN_ROWS:
        raise ValueError(f"need at least {MIN_ROWS} rows, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], hidden, rng)
    params = neural.train(
        params,
        lambda p, xb, yb, r: loss_and_grad(p, xb, yb, r, dropout),
        mae_loss,
        X,
        y,
        learning_rate=learning_rate,
        batch_size=batch_size,
        max_epochs=max_epochs,
        patience=patience,
        seed=seed + 1,
    )
    return FfnnModel(params=params, n_features=X.shape[1])
