from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterable, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from .errors import DomainError

__all__ = ["RateFit", "fit_loglog_rate", "MIN_R_SQUARED"]

MIN_R_SQUARED = 0.98


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through ``(log eps, log value)``."""

    slope: float
    intercept: float
    r_squared: float
    n_points: int

    @property
    def reliable(self) -> bool:
        return self.r_squared >= MIN_R_SQUARED

    def predict(self, epsilon: float) -> float:
        return float(np.exp(self.intercept) * epsilon**self.slope)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "reliable": self.reliable,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RateFit":
        return cls(
            slope=float(payload["slope"]),
            intercept=float(payload["intercept"]),
            r_squared=float(payload["r_squared"]),
            n_points=int(payload["n_points"]),
        )


def fit_loglog_rate(pairs: Iterable[Tuple[float, float]]) -> RateFit:
    """Fit ``value ~ C * eps**slope``.

    Needs at least three pairs with distinct positive ``eps`` and positive values.
    A constant series fits with slope 0 and ``r_squared`` 1.
    """

    data: Sequence[Tuple[float, float]] = list(pairs)
    if len(data) < 3:
        raise DomainError(f"a rate fit needs at least 3 points, got {len(data)}")
    eps = np.array([pair[0] for pair in data], dtype=float)
    values = np.array([pair[1] for pair in data], dtype=float)
    if np.any(~np.isfinite(eps)) or np.any(~np.isfinite(values)) or np.any(eps <= 0) or np.any(values <= 0):
        raise DomainError("rate fits need finite positive epsilons and values")
    if np.unique(eps).size != eps.size:
        raise DomainError("rate fits need distinct epsilons")
    log_eps = np.log(eps)
    log_values = np.log(values)
    if np.ptp(log_values) <= 1e-14 * max(1.0, float(np.max(np.abs(log_values)))):
        return RateFit(slope=0.0, intercept=float(log_values.mean()), r_squared=1.0, n_points=eps.size)
    fit = linregress(log_eps, log_values)
    return RateFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue**2),
        n_points=int(eps.size),
    )
