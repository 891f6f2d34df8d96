"""Indexed series and log-log decay fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InsufficientPointsError(ValueError):
    """Fewer than the required number of points above the noise floor."""


@dataclass(frozen=True)
class TailSeries:
    n: np.ndarray
    values: np.ndarray
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = np.asarray(self.n)
        v = np.asarray(self.values, dtype=float)
        if n.shape != v.shape:
            raise ValueError("n and values differ in shape")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float
    n_min: float
    n_max: float
    n_points: int

    def __call__(self, n):
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


def fit_decay(series: TailSeries, window=None, noise_floor: float = 1e-12,
              min_points: int = 5) -> DecayFit:
    """Least squares of log|value| on log n over the window, above the floor."""
    n = series.n.astype(float)
    v = np.abs(series.values)
    keep = v > noise_floor
    if window is not None:
        lo, hi = window
        keep &= (n >= lo) & (n <= hi)
    if keep.sum() < min_points:
        raise InsufficientPointsError(f"{int(keep.sum())} points above the noise floor, need {min_points}")
    x, y = np.log(n[keep]), np.log(v[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / ss) if ss > 0 else 1.0
    return DecayFit(float(slope), float(intercept), r2, float(n[keep].min()),
                    float(n[keep].max()), int(keep.sum()))
