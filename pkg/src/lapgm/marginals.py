"""Tabulated 1-D densities, skew-Normal marginals, and mixtures.

Every density lives on an explicit increasing grid and is kept normalized so
that its trapezoid integral is 1; summaries (moments, quantiles) are computed
from the same tabulation, which keeps the whole pipeline free of closed-form
assumptions about the shapes it produces.
"""

import math

import numpy as np
from scipy.stats import norm as _norm


class MarginalDensity:
    """A normalized density tabulated on an increasing grid."""

    def __init__(self, x, pdf, normalize=True):
        x = np.asarray(x, dtype=np.float64)
        pdf = np.asarray(pdf, dtype=np.float64)
        if x.ndim != 1 or x.size < 2 or pdf.shape != x.shape:
            raise ValueError("grid and density must be equal-length 1-D arrays")
        if not np.all(np.diff(x) > 0):
            raise ValueError("support grid must be strictly increasing")
        if np.any(pdf < 0) or not np.all(np.isfinite(pdf)):
            raise ValueError("density values must be finite and nonnegative")
        if normalize:
            z = np.trapezoid(pdf, x)
            if z <= 0:
                raise ValueError("density integrates to zero")
            pdf = pdf / z
        self.x = x
        self.pdf = pdf

    @classmethod
    def from_log(cls, x, logpdf):
        logpdf = np.asarray(logpdf, dtype=np.float64)
        return cls(x, np.exp(logpdf - logpdf.max()))

    def integral(self):
        return float(np.trapezoid(self.pdf, self.x))

    def interp_to(self, grid):
        """Linear interpolation of the density onto another grid (0 outside)."""
        return np.interp(grid, self.x, self.pdf, left=0.0, right=0.0)

    def cdf(self):
        segs = 0.5 * np.diff(self.x) * (self.pdf[1:] + self.pdf[:-1])
        c = np.concatenate([[0.0], np.cumsum(segs)])
        return c / c[-1]

    def mean(self):
        return float(np.trapezoid(self.x * self.pdf, self.x))

    def var(self):
        m = self.mean()
        return float(np.trapezoid((self.x - m) ** 2 * self.pdf, self.x))

    def sd(self):
        return math.sqrt(max(self.var(), 0.0))

    def skewness(self):
        m, s = self.mean(), self.sd()
        if s == 0:
            return 0.0
        return float(np.trapezoid(((self.x - m) / s) ** 3 * self.pdf, self.x))

    def quantile(self, p):
        c = self.cdf()
        return np.interp(p, c, self.x)

    def mode(self):
        return float(self.x[int(np.argmax(self.pdf))])

    def summary(self):
        q = self.quantile([0.025, 0.5, 0.975])
        return {
            "mean": self.mean(),
            "sd": self.sd(),
            "q0.025": float(q[0]),
            "q0.5": float(q[1]),
            "q0.975": float(q[2]),
        }

    def transform(self, fn, dfn, num=None):
        """Density of fn(X) for a smooth monotone map with derivative dfn."""
        tx = fn(self.x)
        jac = np.abs(dfn(self.x))
        if tx[0] > tx[-1]:
            tx, jac, pdf = tx[::-1], jac[::-1], self.pdf[::-1]
        else:
            pdf = self.pdf
        dens = np.where(jac > 0, pdf / np.where(jac > 0, jac, 1.0), 0.0)
        return MarginalDensity(tx, dens)

    def __repr__(self):
        return (f"MarginalDensity(n={self.x.size}, "
                f"range=[{self.x[0]:.4g}, {self.x[-1]:.4g}])")


def gaussian_marginal(mean, sd, num=201, span=6.0):
    """Normal(mean, sd^2) tabulated on mean +/- span*sd."""
    if sd <= 0:
        raise ValueError("sd must be positive")
    x = mean + sd * np.linspace(-span, span, num)
    logpdf = -0.5 * ((x - mean) / sd) ** 2
    return MarginalDensity.from_log(x, logpdf)


_SQRT_2_PI = math.sqrt(2.0 / math.pi)


class SkewNormalMarginal:
    """Skew-Normal(location xi, scale omega, shape a).

    ``skew_capped`` and ``fit_residual`` are diagnostic flags set by the
    matching procedure that produced the marginal; they do not change the
    density.
    """

    def __init__(self, xi, omega, a, skew_capped=False, fit_residual=0.0):
        if omega <= 0:
            raise ValueError("scale must be positive")
        self.xi = float(xi)
        self.omega = float(omega)
        self.a = float(a)
        self.skew_capped = bool(skew_capped)
        self.fit_residual = float(fit_residual)

    @property
    def delta(self):
        return self.a / math.sqrt(1.0 + self.a * self.a)

    def mean(self):
        return self.xi + self.omega * self.delta * _SQRT_2_PI

    def var(self):
        d = self.delta
        return self.omega ** 2 * (1.0 - 2.0 * d * d / math.pi)

    def sd(self):
        return math.sqrt(self.var())

    def skewness(self):
        d = self.delta * _SQRT_2_PI
        return (4.0 - math.pi) / 2.0 * d ** 3 / (1.0 - d * d) ** 1.5

    def logpdf(self, x):
        t = (np.asarray(x, dtype=np.float64) - self.xi) / self.omega
        # log(2 phi(t) Phi(a t)) - log omega
        return (math.log(2.0) - 0.5 * t * t - 0.5 * math.log(2.0 * math.pi)
                + _norm.logcdf(self.a * t) - math.log(self.omega))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def tabulate(self, num=201, span=6.0):
        s = self.sd()
        m = self.mean()
        x = np.linspace(m - span * s, m + span * s, num)
        return MarginalDensity(x, self.pdf(x))

    def summary(self):
        return self.tabulate().summary()

    def __repr__(self):
        return (f"SkewNormalMarginal(xi={self.xi:.6g}, omega={self.omega:.6g}, "
                f"a={self.a:.6g})")


def _as_density(obj):
    return obj.tabulate() if isinstance(obj, SkewNormalMarginal) else obj


def mix_over_theta(points, per_point):
    """Weighted pointwise mixture of per-configuration marginals.

    ``points`` may be ThetaPoint-like objects carrying ``weight`` or a plain
    sequence of weights.  A single component is returned unchanged.
    """
    if len(per_point) == 0:
        raise ValueError("cannot mix an empty list of marginals")
    weights = np.array([getattr(p, "weight", p) for p in points], dtype=np.float64)
    if weights.size != len(per_point):
        raise ValueError("points and marginals must have equal length")
    dens = [_as_density(d) for d in per_point]
    if len(dens) == 1:
        return dens[0]
    weights = weights / weights.sum()
    grid = np.unique(np.concatenate([d.x for d in dens]))
    mixed = np.zeros_like(grid)
    for w, d in zip(weights, dens):
        mixed += w * d.interp_to(grid)
    return MarginalDensity(grid, mixed)


def tv_distance(p, q):
    """Total-variation distance: half the integrated absolute difference,
    with both densities renormalized on the common (union) grid."""
    p, q = _as_density(p), _as_density(q)
    grid = np.unique(np.concatenate([p.x, q.x]))
    fp = p.interp_to(grid)
    fq = q.interp_to(grid)
    fp = fp / np.trapezoid(fp, grid)
    fq = fq / np.trapezoid(fq, grid)
    return 0.5 * float(np.trapezoid(np.abs(fp - fq), grid))
