"""Observation families: log-likelihood and derivatives w.r.t. the linear
predictor, vectorized over observations.

``derivatives`` returns (g, h, t): first, second and third derivative of the
per-observation log-likelihood in eta.  The quadratic expansion used by the
Gaussian approximation needs g and h; the cubic marginal correction needs t.
"""

import numpy as np
from scipy.special import gammaln

from .errors import DataError, NumericalError

# beyond this exp() overflows double precision
_ETA_LIMIT = 700.0


def _check_eta(eta):
    if np.any(np.abs(eta) > _ETA_LIMIT) or not np.all(np.isfinite(eta)):
        raise NumericalError("linear predictor out of range (|eta| > 700); model is diverging")


class GaussianFamily:
    """y ~ N(eta, 1/tau) with observation precision tau."""

    name = "gaussian"

    def __init__(self, tau=1.0):
        if tau <= 0:
            raise ValueError("observation precision must be positive")
        self.tau = float(tau)

    def loglik(self, y, eta):
        return 0.5 * np.log(self.tau / (2.0 * np.pi)) - 0.5 * self.tau * (y - eta) ** 2

    def derivatives(self, y, eta):
        g = self.tau * (y - eta)
        h = np.full_like(np.asarray(eta, dtype=float), -self.tau)
        t = np.zeros_like(h)
        return g, h, t

    def validate(self, y):
        pass


class PoissonFamily:
    """y ~ Poisson(exp(eta))."""

    name = "poisson"

    def loglik(self, y, eta):
        _check_eta(eta)
        return y * eta - np.exp(eta) - gammaln(y + 1.0)

    def derivatives(self, y, eta):
        _check_eta(eta)
        mu = np.exp(eta)
        return y - mu, -mu, -mu

    def validate(self, y):
        ok = np.isnan(y) | ((y >= 0) & (y == np.floor(y)))
        if not np.all(ok):
            raise DataError("poisson responses must be non-negative integers")


class BinomialFamily:
    """y ~ Binomial(ntrials, logit^{-1}(eta))."""

    name = "binomial"

    def __init__(self, ntrials):
        self.ntrials = np.asarray(ntrials, dtype=np.float64)
        if np.any(self.ntrials < 1) or np.any(self.ntrials != np.floor(self.ntrials)):
            raise DataError("Ntrials must be integers >= 1")

    def loglik(self, y, eta):
        _check_eta(eta)
        n = self.ntrials
        binom = gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)
        return binom + y * eta - n * np.logaddexp(0.0, eta)

    def derivatives(self, y, eta):
        _check_eta(eta)
        n = self.ntrials
        p = 1.0 / (1.0 + np.exp(-eta))
        g = y - n * p
        h = -n * p * (1.0 - p)
        t = h * (1.0 - 2.0 * p)
        return g, h, t

    def validate(self, y):
        ok = np.isnan(y) | ((y >= 0) & (y <= self.ntrials) & (y == np.floor(y)))
        if not np.all(ok):
            raise DataError("binomial responses must be integers in [0, Ntrials]")


FAMILIES = ("gaussian", "poisson", "binomial")


def loglik(family, y, eta):
    return family.loglik(np.asarray(y, dtype=float), np.asarray(eta, dtype=float))


def derivatives(family, y, eta):
    return family.derivatives(np.asarray(y, dtype=float), np.asarray(eta, dtype=float))
