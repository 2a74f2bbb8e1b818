"""Array codecs for fitted models, used by the versioned artifact container."""

from __future__ import annotations

import numpy as np

from .arima import ArimaModel
from .ffnn import FfnnModel
from .forest import RandomForest, Tree
from .linear import LinearModel
from .lstm import LstmModel


def model_to_arrays(model) -> dict[str, np.ndarray]:
    if isinstance(model, LinearModel):
        return {"intercept": np.asarray(model.intercept), "coef": model.coef}
    if isinstance(model, FfnnModel):
        out = {f"p_{k}": v for k, v in model.params.items()}
        out["n_features"] = np.asarray(model.n_features)
        return out
    if isinstance(model, LstmModel):
        out = {f"p_{k}": v for k, v in model.params.items()}
        out["meta"] = np.asarray([model.n_layers, model.n_features, model.units])
        return out
    if isinstance(model, RandomForest):
        out = {"n_features": np.asarray(model.n_features),
               "y_range": np.asarray([model.y_min, model.y_max]),
               "n_trees": np.asarray(len(model.trees))}
        for i, t in enumerate(model.trees):
            for name in ("feat", "thr", "left", "right", "value", "depth_of"):
                out[f"t{i:05d}_{name}"] = getattr(t, name)
        return out
    if isinstance(model, ArimaModel):
        return {"order": np.asarray([model.p, model.d, model.q]),
                "mean": np.asarray(model.mean), "ar": model.ar, "ma": model.ma,
                "sigma2": np.asarray(model.sigma2), "aic": np.asarray(model.aic)}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_arrays(family: str, arrays: dict[str, np.ndarray]):
    if family == "linear":
        return LinearModel(intercept=float(arrays["intercept"]), coef=arrays["coef"])
    if family == "ffnn":
        params = {k[2:]: arrays[k] for k in arrays if k.startswith("p_")}
        return FfnnModel(params=params, n_features=int(arrays["n_features"]))
    if family in ("lstm2", "lstm1_finetune"):
        params = {k[2:]: arrays[k] for k in arrays if k.startswith("p_")}
        n_layers, n_features, units = (int(x) for x in arrays["meta"])
        return LstmModel(params=params, n_layers=n_layers, n_features=n_features, units=units)
    if family == "random_forest":
        trees = []
        for i in range(int(arrays["n_trees"])):
            trees.append(Tree(*(arrays[f"t{i:05d}_{name}"]
                                for name in ("feat", "thr", "left", "right", "value", "depth_of"))))
        y_min, y_max = (float(x) for x in arrays["y_range"])
        return RandomForest(trees=tuple(trees), n_features=int(arrays["n_features"]),
                            y_min=y_min, y_max=y_max)
    if family == "arima":
        p, d, q = (int(x) for x in arrays["order"])
        return ArimaModel(p=p, d=d, q=q, mean=float(arrays["mean"]), ar=arrays["ar"],
                          ma=arrays["ma"], sigma2=float(arrays["sigma2"]), aic=float(arrays["aic"]))
    raise ValueError(f"unknown family {family!r}")
