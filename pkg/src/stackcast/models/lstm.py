"""LSTM return-sequence models over length-3 weekly feature windows.

A standard cell (sigmoid input/forget/output gates, tanh candidate and
output squashing) with 32 units; the linear head predicts a return at each
of the three timesteps, targets shifted one week ahead of the inputs, so the
first two outputs only help training and the third is the real forecast.
Loss is the mean MAE over the three outputs; dropout 0.6 applies to layer
outputs during training. Two variants: a two-layer stack trained on all
stocks, and a one-layer model whose head alone is retrained per stock with
the recurrent parameters frozen and a 10x smaller step size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neural

UNITS = 32
DROPOUT = 0.6
SEQ_LEN = 3


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def init_params(n_features: int, units: int, n_layers: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    d_in = n_features
    for layer in range(n_layers):
        params[f"l{layer}_Wx"] = neural.uniform_fan_in(rng, (d_in, 4 * units), d_in)
        params[f"l{layer}_Wh"] = neural.uniform_fan_in(rng, (units, 4 * units), units)
        params[f"l{layer}_b"] = np.zeros(4 * units)
        d_in = units
    params["head_w"] = neural.uniform_fan_in(rng, (units,), units)
    params["head_b"] = np.zeros(())
    return params


def _layer_forward(x_seq: np.ndarray, Wx: np.ndarray, Wh: np.ndarray, b: np.ndarray):
    B, T, _ = x_seq.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    out = np.empty((B, T, H))
    caches = []
    for t in range(T):
        x_t = x_seq[:, t]
        z = x_t @ Wx + h @ Wh + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        out[:, t] = h
        caches.append((x_t, h_prev, c_prev, i, f, g, o, tc))
    return out, caches


def _layer_backward(dh_seq: np.ndarray, caches, Wx: np.ndarray, Wh: np.ndarray):
    B, T, H = dh_seq.shape
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dx_seq = np.empty((B, T, Wx.shape[0]))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        x_t, h_prev, c_prev, i, f, g, o, tc = caches[t]
        dh = dh_seq[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dz = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)],
            axis=1,
        )
        dWx += x_t.T @ dz
        dWh += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx_seq[:, t] = dz @ Wx.T
        dh_next = dz @ Wh.T
    return dx_seq, dWx, dWh, db


def forward(params: dict[str, np.ndarray], X: np.ndarray, n_layers: int,
            masks: list[np.ndarray] | None = None, keep: float = 1.0 - DROPOUT):
    inp = X
    caches = []
    inputs = []
    for layer in range(n_layers):
        inputs.append(inp)
        out, cache = _layer_forward(inp, params[f"l{layer}_Wx"], params[f"l{layer}_Wh"], params[f"l{layer}_b"])
        if masks is not None:
            out = out * masks[layer] / keep
        caches.append(cache)
        inp = out
    yhat = inp @ params["head_w"] + params["head_b"]
    return yhat, (inputs, caches, inp)


def mae_loss(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray, n_layers: int) -> float:
    yhat, _ = forward(params, X, n_layers)
    return float(np.mean(np.abs(yhat - y)))


def loss_and_grad(params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray,
                  rng: np.random.Generator | None, n_layers: int, dropout: float = DROPOUT):
    keep = 1.0 - dropout
    masks = None
    if rng is not None and dropout > 0.0:
        B, T, _ = X.shape
        H = params["head_w"].size
        masks = [(rng.random((B, T, H)) < keep).astype(float) for _ in range(n_layers)]
    yhat, (inputs, caches, head_in) = forward(params, X, n_layers, masks, keep)
    resid = yhat - y
    loss = float(np.mean(np.abs(resid)))
    g = np.sign(resid) / resid.size
    grads = {
        "head_w": np.einsum("bt,bth->h", g, head_in),
        "head_b": np.asarray(g.sum()),
    }
    dh = g[:, :, None] * params["head_w"]
    for layer in reversed(range(n_layers)):
        if masks is not None:
            dh = dh * masks[layer] / keep
        dx, dWx, dWh, db = _layer_backward(dh, caches[layer], params[f"l{layer}_Wx"], params[f"l{layer}_Wh"])
        grads[f"l{layer}_Wx"] = dWx
        grads[f"l{layer}_Wh"] = dWh
        grads[f"l{layer}_b"] = db
        dh = dx
    return loss, grads


@dataclass(frozen=True)
class LstmModel:
    params: dict[str, np.ndarray]
    n_layers: int
    n_features: int
    units: int

    def predict_sequence(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 3 or X.shape[1] != SEQ_LEN or X.shape[2] != self.n_features:
            raise ValueError(f"expected (n, {SEQ_LEN}, {self.n_features}) input, got {X.shape}")
        yhat, _ = forward(self.params, X, self.n_layers)
        return yhat

    def predict(self, X: np.ndarray) -> np.ndarray:
        """The third-step output: the genuine one-week-ahead forecast."""
        return self.predict_sequence(X)[:, -1]


def fit_lstm(
    X: np.ndarray,
    y: np.ndarray,
    n_layers: int = 2,
    units: int = UNITS,
    dropout: float = DROPOUT,
    learning_rate: float = 1e-3,
    batch_size: int = 256,
    max_epochs: int = 200,
    patience: int = 10,
    seed: int = 0,
) -> LstmModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 3 or X.shape[1] != SEQ_LEN:
        raise ValueError(f"expected (n, {SEQ_LEN}, d) sequences, got {X.shape}")
    if y.shape != X.shape[:2]:
        raise ValueError(f"targets must be (n, {SEQ_LEN}), got {y.shape}")
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[2], units, n_layers, rng)
    params = neural.train(
        params,
        lambda p, xb, yb, r: loss_and_grad(p, xb, yb, r, n_layers, dropout),
        lambda p, xv, yv: mae_loss(p, xv, yv, n_layers),
        X,
        y,
        learning_rate=learning_rate,
        batch_size=batch_size,
        max_epochs=max_epochs,
        patience=patience,
        seed=seed + 1,
    )
    return LstmModel(params=params, n_layers=n_layers, n_features=X.shape[2], units=units)


def finetune_head(
    model: LstmModel,
    X: np.ndarray,
    y: np.ndarray,
    dropout: float = DROPOUT,
    learning_rate: float = 1e-4,
    max_epochs: int = 20,
    batch_size: int = 256,
    seed: int = 0,
) -> LstmModel:
    """Per-stock head retraining with the recurrent parameters frozen."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = {k: v.copy() for k, v in model.params.items()}
    params = neural.train(
        params,
        lambda p, xb, yb, r: loss_and_grad(p, xb, yb, r, model.n_layers, dropout),
        lambda p, xv, yv: mae_loss(p, xv, yv, model.n_layers),
        X,
        y,
        learning_rate=learning_rate,
        batch_size=batch_size,
        max_epochs=max_epochs,
        patience=max_epochs,
        seed=seed,
        val_fraction=0.0,
        trainable={"head_w", "head_b"},
    )
    return LstmModel(params=params, n_layers=model.n_layers, n_features=model.n_features, units=model.units)
