"""Least-squares fits of log2-magnitudes against a parameter."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError


@dataclass
class DecayFit:
    x: np.ndarray
    y: np.ndarray          # log2 of the measured magnitudes
    slope: float
    intercept: float
    max_residual: float
    used: np.ndarray       # boolean mask of points entering the fit
    notes: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return -self.slope

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "gamma": self.gamma,
                "max_residual": self.max_residual, "x": self.x.tolist(), "log2_value": self.y.tolist(),
                "used": self.used.tolist()}


def fit_decay(x, values, mask=None, min_points: int = 3) -> DecayFit:
    """Fit log2(values) = slope * x + intercept over finite, positive entries."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log2(v)
    used = np.isfinite(y)
    if mask is not None:
        used &= np.asarray(mask, dtype=bool)
    if used.sum() < min_points:
        raise PreconditionError(f"fit needs at least {min_points} usable points, got {int(used.sum())}")
    A = np.vstack([x[used], np.ones(used.sum())]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y[used], rcond=None)
    resid = y[used] - (slope * x[used] + intercept)
    return DecayFit(x, y, float(slope), float(intercept), float(np.max(np.abs(resid))), used)
