"""Model zoo: one spec type and a uniform fit/predict contract over six
variants of five families (ARIMA, linear, random forest, FFNN, and the
two LSTM configurations).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FAMILIES = ("arima", "linear", "random_forest", "ffnn", "lstm2", "lstm1_finetune")
SCOPES = ("per_stock", "per_sector", "all_stock")
LOOKBACKS = ("all_past", "rolling_10y")
UPDATES = ("yearly", "monthly")

_LINEAR_FEATURES = ("return_t", "sentiment", "cci", "macdh", "rsi", "kdj_k", "wr", "cmf")
_FULL_FEATURES = ("return_t", "sentiment", "pe", "ps", "pb", "cci", "macdh", "rsi", "kdj_k", "wr", "atr_pct", "cmf")

FAMILY_FEATURES: dict[str, tuple[str, ...]] = {
    "arima": (),
    "linear": _LINEAR_FEATURES,
    "random_forest": _FULL_FEATURES,
    "ffnn": _FULL_FEATURES,
    "lstm2": _FULL_FEATURES,
    "lstm1_finetune": _FULL_FEATURES,
}

SEQUENCE_LENGTH = 3  # LSTM input/output sequence length


@dataclass(frozen=True)
class ModelSpec:
    family: str
    model_id: str
    scope: str = "all_stock"
    lookback: str = "all_past"
    update: str = "yearly"
    feature_set: tuple[str, ...] = ()
    seed: int = 0
    # forest knobs
    n_estimators: int = 400
    max_depth: int = 8
    # neural training knobs
    max_epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    patience: int = 10
    finetune_epochs: int = 20
    finetune_lr: float = 1e-4

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.lookback not in LOOKBACKS:
            raise ValueError(f"unknown lookback {self.lookback!r}")
        if self.update not in UPDATES:
            raise ValueError(f"unknown update {self.update!r}")
        expected = FAMILY_FEATURES[self.family]
        if not self.feature_set:
            object.__setattr__(self, "feature_set", expected)
        elif tuple(self.feature_set) != expected:
            raise ValueError(f"{self.family} feature set must be {expected}")
        if self.family == "arima" and self.scope != "per_stock":
            raise ValueError("arima is per_stock and univariate")


@dataclass(frozen=True)
class Prediction:
    ticker: str
    week_end: object
    model_id: str
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite prediction for {self.ticker} {self.week_end}")


def default_specs(seed: int = 0) -> list[ModelSpec]:
    """The reported configuration: the four ensemble base models plus the
    all-stock linear regression the index ensemble also consumes."""
    return [
        ModelSpec("linear", "linear_all", scope="all_stock", lookback="rolling_10y", update="yearly", seed=seed),
        ModelSpec("random_forest", "rf_sector", scope="per_sector", lookback="rolling_10y", update="yearly", seed=seed),
        ModelSpec("ffnn", "ffnn_monthly", scope="all_stock", lookback="rolling_10y", update="monthly", seed=seed),
        ModelSpec("lstm2", "lstm2", scope="all_stock", lookback="all_past", update="yearly", seed=seed),
        ModelSpec("lstm1_finetune", "lstm1_ft", scope="all_stock", lookback="all_past", update="yearly", seed=seed),
    ]


ENSEMBLE_BASE_IDS = ["rf_sector", "ffnn_monthly", "lstm1_ft", "lstm2"]
INDEX_BASE_IDS = ["linear_all", "rf_sector", "ffnn_monthly", "lstm1_ft", "lstm2"]

ARTIFACT_VERSION = 1


def window_hash(train_rows_key: str) -> str:
    return hashlib.sha256(train_rows_key.encode()).hexdigest()[:16]


def save_model(path: str | Path, spec: ModelSpec, train_key: str, arrays: dict[str, np.ndarray]) -> None:
    """Versioned binary container: the arrays plus a JSON manifest."""
    manifest = {
        "version": ARTIFACT_VERSION,
        "family": spec.family,
        "model_id": spec.model_id,
        "scope": spec.scope,
        "lookback": spec.lookback,
        "update": spec.update,
        "seed": spec.seed,
        "window_hash": window_hash(train_key),
    }
    payload = {f"arr_{k}": v for k, v in arrays.items()}
    payload["manifest"] = np.frombuffer(json.dumps(manifest, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **payload)


def load_model(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = np.load(path)
    manifest = json.loads(bytes(data["manifest"]).decode())
    if manifest.get("version") != ARTIFACT_VERSION:
        raise ValueError(f"unsupported artifact version {manifest.get('version')}")
    arrays = {k[4:]: data[k] for k in data.files if k.startswith("arr_")}
    return manifest, arrays
