"""Hyperparameter priors, evaluated on the internal (unbounded) scale.

Precision-like parameters live internally as theta = log(precision) and
correlations as theta = log((1+rho)/(1-rho)); every log-density here already
includes the Jacobian of its transform, so values can be summed directly into
the joint log-posterior over internal coordinates.
"""

import math

import numpy as np
from scipy.special import gammaln


def gamma_log_prior(theta, shape, rate):
    """log density of theta = log(tau) when tau ~ Gamma(shape, rate)."""
    return shape * math.log(rate) - float(gammaln(shape)) + shape * theta - rate * math.exp(theta)


def pc_prec_log_prior(theta, u, alpha):
    """Penalised-complexity prior on a precision, internal scale.

    Exponential on the distance d = sigma = exp(-theta/2) with rate lambda
    chosen so that P(sigma > u) = alpha.
    """
    if not (0.0 < alpha < 1.0) or u <= 0.0:
        raise ValueError("pc_prec_log_prior requires u > 0 and 0 < alpha < 1")
    lam = -math.log(alpha) / u
    return math.log(lam / 2.0) - lam * math.exp(-theta / 2.0) - theta / 2.0


def gaussian_log_prior(theta, mean, prec):
    """Gaussian log density with given mean and precision."""
    return 0.5 * math.log(prec / (2.0 * math.pi)) - 0.5 * prec * (theta - mean) ** 2


def gamma_distance_density(d):
    """Unnormalized density of the distance scale induced by a Gamma(1,1)
    precision prior in a simple hierarchical setup: exp(-1/d^2) / d^3 on
    d > 0.  Its mode sits at sqrt(2/3); the density vanishes super-fast as
    d -> 0+, which is what makes this prior shape pathological (it cannot
    concentrate near the base model)."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    out = np.exp(-1.0 / d**2) / d**3
    return out if out.ndim else float(out)


class PriorSpec:
    """A named prior with parameters, evaluated on the internal scale."""

    __slots__ = ("family", "params")

    def __init__(self, family, params):
        self.family = family
        self.params = tuple(float(p) for p in params)
        if family == "gamma":
            if len(self.params) != 2 or min(self.params) <= 0:
                raise ValueError("gamma prior takes (shape, rate), both > 0")
        elif family == "pc.prec":
            if len(self.params) != 2:
                raise ValueError("pc.prec prior takes (u, alpha)")
        elif family == "gaussian":
            if len(self.params) != 2 or self.params[1] <= 0:
                raise ValueError("gaussian prior takes (mean, precision > 0)")
        else:
            raise ValueError(f"unknown prior family {family!r}")

    def log_density(self, theta):
        if self.family == "gamma":
            return gamma_log_prior(theta, *self.params)
        if self.family == "pc.prec":
            return pc_prec_log_prior(theta, *self.params)
        return gaussian_log_prior(theta, *self.params)

    def __eq__(self, other):
        return (
            isinstance(other, PriorSpec)
            and self.family == other.family
            and self.params == other.params
        )

    def __repr__(self):
        return f"PriorSpec({self.family!r}, {self.params!r})"
