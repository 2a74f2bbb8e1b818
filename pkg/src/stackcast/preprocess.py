"""Per-column Gaussianization: Yeo-Johnson power transform fitted on training
windows by profile log-likelihood, then standardization, zero-fill for missing
values, and a +/-4.5 cap on out-of-sample rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LAMBDA_RANGE = (-5.0, 5.0)
GOLDEN_TOL = 1e-6
DEFAULT_CAP = 4.5
MIN_PRESENT = 30
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ColumnTransform:
    lambda_: float
    mean: float
    sd: float
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be positive")
        if self.cap <= 0:
            raise ValueError("cap must be positive")


def yeo_johnson(x: np.ndarray, lam: float) -> np.ndarray:
    """The power transform, defined for all real inputs and strictly monotone in x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        if abs(lam) < 1e-12:
            out[pos] = np.log1p(x[pos])
        else:
            out[pos] = np.expm1(lam * np.log1p(x[pos])) / lam
        neg = ~pos
        if abs(2.0 - lam) < 1e-12:
            out[neg] = -np.log1p(-x[neg])
        else:
            out[neg] = -np.expm1((2.0 - lam) * np.log1p(-x[neg])) / (2.0 - lam)
    return out


def _profile_loglik(x: np.ndarray, lam: float) -> float:
    z = yeo_johnson(x, lam)
    if not np.all(np.isfinite(z)):
        return -np.inf
    var = z.var()
    if var <= 0:
        return -np.inf
    n = x.size
    return -0.5 * n * math.log(var) + (lam - 1.0) * float(np.sum(np.sign(x) * np.log1p(np.abs(x))))


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_transform(train_values) -> ColumnTransform:
    """Fit lambda by golden-section search on the Gaussian profile log-likelihood,
    then record the post-power mean/sd of the present training values."""
    x = np.asarray(train_values, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < MIN_PRESENT:
        raise ValueError(f"need at least {MIN_PRESENT} present values, got {x.size}")
    if np.all(x == x[0]):
        raise ValueError("zero variance")
    lam = _golden_max(lambda l: _profile_loglik(x, l), *LAMBDA_RANGE, tol=GOLDEN_TOL)
    z = yeo_johnson(x, lam)
    sd = float(z.std())
    if sd == 0.0:
        raise ValueError("zero variance")
    return ColumnTransform(lambda_=lam, mean=float(z.mean()), sd=sd)


def apply(values, t: ColumnTransform, is_test: bool) -> np.ndarray:
    """Transform, standardize, fill missing with 0; cap out-of-sample rows at |cap|."""
    x = np.asarray(values, dtype=float)
    out = np.zeros_like(x)
    present = np.isfinite(x)
    z = (yeo_johnson(x[present], t.lambda_) - t.mean) / t.sd
    if is_test:
        z = np.clip(z, -t.cap, t.cap)
    out[present] = z
    return out
