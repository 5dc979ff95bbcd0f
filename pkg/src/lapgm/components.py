"""Structured random-effect precision builders and internal-scale transforms.

Each builder returns a :class:`~lapgm.sparse.SparsePrecision` over the m
elements of one effect vector.  Hyperparameters arrive on the natural scale
(precisions, correlations); mapping from the internal optimization scale is
done by the transform helpers at the bottom.
"""

import math
from functools import lru_cache

import numpy as np

from .sparse import SparsePrecision, build_sparse


def iid_precision(m, tau):
    """Exchangeable effects: tau * identity."""
    if m < 1:
        raise ValueError("iid component needs m >= 1")
    if tau <= 0:
        raise ValueError("precision must be positive")
    idx = np.arange(m, dtype=np.int64)
    return SparsePrecision(m, idx, idx, np.full(m, float(tau)))


def ar1_precision(m, phi, tau_marg):
    """Stationary first-order autoregression, parameterized by the marginal
    precision of each element; inverse has entries phi^|s-t| / tau_marg."""
    if m < 1:
        raise ValueError("ar1 component needs m >= 1")
    if tau_marg <= 0:
        raise ValueError("marginal precision must be positive")
    if not -1.0 < phi < 1.0:
        raise ValueError("ar1 correlation must lie in (-1, 1)")
    if m == 1:
        return iid_precision(1, tau_marg)
    kappa = tau_marg / (1.0 - phi * phi)
    diag = np.full(m, (1.0 + phi * phi) * kappa)
    diag[0] = diag[-1] = kappa
    rows = np.concatenate([np.arange(m), np.arange(m - 1)])
    cols = np.concatenate([np.arange(m), np.arange(1, m)])
    vals = np.concatenate([diag, np.full(m - 1, -phi * kappa)])
    return SparsePrecision(m, rows, cols, vals)


def rw2_structure(m, scale_model=False):
    """Second-order random-walk structure matrix R = D'D, where D maps a
    vector to its second differences.  Rank m-2; null space spans constant
    and linear sequences.  With scale_model, R is multiplied by the geometric
    mean of the marginal variances of its generalized inverse, so that the
    precision hyperparameter multiplying it refers to a field whose typical
    marginal variance is one."""
    if m < 3:
        raise ValueError("rw2 component needs m >= 3")
    rows, cols, vals = [], [], []
    d = np.zeros(m)
    for i in range(m - 2):
        d[:] = 0.0
        d[i : i + 3] = (1.0, -2.0, 1.0)
        for a in range(i, i + 3):
            for b in range(a, i + 3):
                rows.append(a)
                cols.append(b)
                vals.append(d[a] * d[b])
    R = build_sparse(zip(rows, cols, vals), m)
    if scale_model:
        R = R.with_values(R.vals * scale_model_factor(m))
    return R


@lru_cache(maxsize=None)
def scale_model_factor(m):
    """Geometric mean of the marginal variances of the unscaled rw2 field,
    i.e. of diag(pinv(R))."""
    R = rw2_structure(m).to_dense()
    w, V = np.linalg.eigh(R)
    tol = w[-1] * m * np.finfo(float).eps
    keep = w > tol
    pinv_diag = (V[:, keep] ** 2 / w[keep]).sum(axis=1)
    return float(np.exp(np.mean(np.log(pinv_diag))))


def rw2_precision(m, tau, scaled=False):
    """tau * R (optionally scaled); rank-deficient by 2, so callers add
    jitter or constraints before factorizing."""
    R = rw2_structure(m, scale_model=scaled)
    return R.with_values(R.vals * tau)


# --- internal-scale transforms ------------------------------------------------

def theta_to_precision(theta):
    return math.exp(theta)


def precision_to_theta(tau):
    if tau <= 0:
        raise ValueError("precision must be positive")
    return math.log(tau)


def theta_to_correlation(theta):
    return 2.0 / (1.0 + math.exp(-theta)) - 1.0


def correlation_to_theta(phi):
    if not -1.0 < phi < 1.0:
        raise ValueError("correlation must lie in (-1, 1)")
    return math.log((1.0 + phi) / (1.0 - phi))
