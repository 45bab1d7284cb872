"""Zero-mean, unit-variance symmetric distributions (Gaussian, Laplace, logistic).

These supply the pointwise law of a stochastic implicit function.  The CDF is
the sigmoid that maps scaled signed distance to vacancy, and the PDF enters
the attenuation density.  All three laws are parameterized to unit variance,
so a field scale ``s`` is exactly the inverse pointwise standard deviation:

* Gaussian:  ``pdf(u) = exp(-u^2/2) / sqrt(2*pi)``
* Laplace:   ``pdf(u) = exp(-sqrt(2)*|u|) / sqrt(2)``
* logistic:  ``pdf(u) = k * e^{-k u} / (1 + e^{-k u})^2`` with ``k = pi/sqrt(3)``

Every function is vectorized over numpy arrays and has a log-space companion
so that ratios like ``pdf(u)/cdf(u)`` stay finite deep in the tails.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy import special

__all__ = [
    "SymmetricDistribution",
    "LOGISTIC_RATE",
    "CDF_FLOOR",
    "CDF_CEIL",
    "pdf",
    "cdf",
    "log_pdf",
    "log_cdf",
]

# Rate of the unit-variance logistic sigmoid: cdf(u) = expit(LOGISTIC_RATE * u).
LOGISTIC_RATE = np.pi / np.sqrt(3.0)

# Tail clamp applied by vacancy(): keeps 1/V and 1/(1-V) finite downstream.
CDF_FLOOR = 1e-300
CDF_CEIL = 1.0 - 1e-16

_SQRT2 = np.sqrt(2.0)
_LOG_GAUSS_NORM = -0.5 * np.log(2.0 * np.pi)


class SymmetricDistribution(enum.Enum):
    """The symmetric unit-variance law of the implicit-function noise."""

    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    LOGISTIC = "logistic"

    def pdf(self, u):
        return pdf(self, u)

    def cdf(self, u):
        return cdf(self, u)

    def log_pdf(self, u):
        return log_pdf(self, u)

    def log_cdf(self, u):
        return log_cdf(self, u)


def pdf(dist: SymmetricDistribution, u):
    """Density of the zero-mean unit-variance law; even in ``u``."""
    u = np.asarray(u, dtype=float)
    if dist is SymmetricDistribution.GAUSSIAN:
        return np.exp(-0.5 * u * u + _LOG_GAUSS_NORM)
    if dist is SymmetricDistribution.LAPLACE:
        return np.exp(-_SQRT2 * np.abs(u)) / _SQRT2
    k = LOGISTIC_RATE
    # k * sigmoid(k u) * sigmoid(-k u), stable at both tails
    return k * special.expit(k * u) * special.expit(-k * u)


def cdf(dist: SymmetricDistribution, u):
    """Cumulative distribution; satisfies ``cdf(u) = 1 - cdf(-u)``."""
    u = np.asarray(u, dtype=float)
    if dist is SymmetricDistribution.GAUSSIAN:
        return special.ndtr(u)
    if dist is SymmetricDistribution.LAPLACE:
        return np.where(u < 0.0,
                        0.5 * np.exp(_SQRT2 * np.minimum(u, 0.0)),
                        1.0 - 0.5 * np.exp(-_SQRT2 * np.maximum(u, 0.0)))
    return special.expit(LOGISTIC_RATE * u)


def log_pdf(dist: SymmetricDistribution, u):
    u = np.asarray(u, dtype=float)
    if dist is SymmetricDistribution.GAUSSIAN:
        return -0.5 * u * u + _LOG_GAUSS_NORM
    if dist is SymmetricDistribution.LAPLACE:
        return -_SQRT2 * np.abs(u) - 0.5 * np.log(2.0)
    k = LOGISTIC_RATE
    return np.log(k) + special.log_expit(k * u) + special.log_expit(-k * u)


def log_cdf(dist: SymmetricDistribution, u):
    u = np.asarray(u, dtype=float)
    if dist is SymmetricDistribution.GAUSSIAN:
        return special.log_ndtr(u)
    if dist is SymmetricDistribution.LAPLACE:
        below = np.log(0.5) + _SQRT2 * np.minimum(u, 0.0)
        above = np.log1p(-0.5 * np.exp(-_SQRT2 * np.maximum(u, 0.0)))
        return np.where(u < 0.0, below, above)
    return special.log_expit(LOGISTIC_RATE * u)
