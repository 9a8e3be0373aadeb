"""Moment maps between the log scale and the raw claim scale.

For ln X ~ N(theta, Sigma): E[X_k] = exp(theta_k + Sigma_kk / 2) and
Cov[X_k, X_l] = E[X_k] E[X_l] (exp(Sigma_kl) - 1). Applied to fitted values
and forecasts, with the fitted-mean covariance playing the role of Sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import unstack
from .errors import NumericalError

# exp saturates near 709 in double precision; reject rather than return inf
_EXP_GUARD = 700.0


@dataclass(frozen=True)
class LogNormalSummary:
    """Location vector and log-scale covariance of a multivariate log-normal."""

    location: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.location, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (loc.size, loc.size):
            raise NumericalError("covariance shape does not match the location vector")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "covariance", cov)


def raw_mean(summary: LogNormalSummary, k: int = None):
    """E[X_k] = exp(theta_k + Sigma_kk / 2); all components when k is None."""
    exponent = summary.location + 0.5 * np.diag(summary.covariance)
    if np.any(exponent > _EXP_GUARD):
        raise NumericalError(
            "raw-scale mean would overflow (log-scale mean plus half variance "
            f"exceeds {_EXP_GUARD})"
        )
    means = np.exp(exponent)
    return means if k is None else float(means[k])


def raw_cov(summary: LogNormalSummary, k: int = None, l: int = None):
    """Cov[X_k, X_l] = E[X_k] E[X_l] (exp(Sigma_kl) - 1); full matrix when unindexed."""
    means = raw_mean(summary)
    cov = np.outer(means, means) * np.expm1(summary.covariance)
    if k is None:
        return cov
    return float(cov[k, l])


def fitted_raw(fit):
    """Raw-scale fitted values and covariance from a log-scale fit.

    Returns (cells, covariance): ``cells`` has shape (n_arrays, n_rows,
    n_cols) with NaN outside the fitted region, ``covariance`` is the full
    raw-scale covariance in stacking order.
    """
    summary = LogNormalSummary(fit.y_hat, fit.omega_fit)
    means = raw_mean(summary)
    cov = raw_cov(summary)
    return unstack(means, fit.design.layout), cov
