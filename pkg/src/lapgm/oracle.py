"""Brute-force references the fast code is tested against.

Everything here trades speed for independence: adaptive quadrature, dense
tensor-grid enumeration, and a bivariate toy posterior whose marginals can be
computed three ways (exact quadrature, whole-joint Gaussian approximation,
per-value profile) for accuracy comparisons.  Nothing in this module reuses
the sparse machinery it is meant to check.
"""

import itertools
import math

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError
from .marginals import MarginalDensity, gaussian_marginal

ENUMERATION_CELL_CAP = 10_000_000


def quad_1d(f, a, b, tol=1.0e-10):
    """Adaptive quadrature of f on [a, b]; returns (value, error_bound)."""
    value, err, info = quad(f, a, b, epsabs=tol, epsrel=tol, limit=200,
                            full_output=True)[:3]
    if "last" in info and info["last"] >= 200:
        raise NumericalError(
            f"quadrature on [{a}, {b}] hit the subdivision limit "
            f"(error bound {err:.3g})")
    return float(value), float(err)


# ----------------------------------------------------------------------
# Bivariate toy: correlated Gaussian prior times two logistic factors,
# the same shape as two Bernoulli successes under a logit link.
# ----------------------------------------------------------------------

def _log_sigmoid(t):
    # log(1/(1+exp(-t))) = -log1p(exp(-t)), stable on both sides
    t = np.asarray(t, dtype=np.float64)
    return np.where(t > 0, -np.log1p(np.exp(-t)), t - np.log1p(np.exp(t)))


def toy_log_joint(x1, x2, rho, c):
    """Unnormalized log density of the bivariate toy posterior."""
    quad_form = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (1.0 - rho * rho)
    return -0.5 * quad_form + _log_sigmoid(c * x1) + _log_sigmoid(c * x2)


def _toy_check(rho, c):
    if not 0.0 <= rho <= 0.999:
        raise ValueError("rho must lie in [0, 0.999]")
    if c <= 0:
        raise ValueError("c must be positive")


def _toy_mode_hessian(rho, c, max_iter=200):
    """Joint mode and negative Hessian of the toy log density (2-D Newton)."""
    Qm = np.array([[1.0, -rho], [-rho, 1.0]]) / (1.0 - rho * rho)
    x = np.zeros(2)
    for _ in range(max_iter):
        s = 1.0 / (1.0 + np.exp(-c * x))        # sigmoid(c x)
        grad = -Qm @ x + c * (1.0 - s)
        curve = c * c * s * (1.0 - s)
        H = Qm + np.diag(curve)
        step = np.linalg.solve(H, grad)
        norm = np.abs(step).max()
        if norm > 1.0:                           # damp far-from-mode steps
            step = step / norm
        x = x + step
        if norm < 1.0e-13:
            return x, H
    raise NumericalError("toy joint mode search did not converge")


def toy_default_grid(rho, c, num=401, span=8.0):
    """Evaluation grid sized from the Gaussian approximation of the toy."""
    mode, H = _toy_mode_hessian(rho, c)
    sd = math.sqrt(np.linalg.inv(H)[0, 0])
    return mode[0] + sd * np.linspace(-span, span, num)


def toy_true_marginal(rho, c, grid=None):
    """Exact marginal of x1 by nested adaptive quadrature."""
    _toy_check(rho, c)
    if grid is None:
        grid = toy_default_grid(rho, c)
    sd_cond = math.sqrt(1.0 - rho * rho)
    logvals = np.empty(grid.size)
    for idx, x1 in enumerate(grid):
        center = rho * x1
        lo, hi = center - (8.0 * sd_cond + 2.0), center + (8.0 * sd_cond + 2.0)
        shift = float(toy_log_joint(x1, center, rho, c))
        val, _ = quad_1d(
            lambda x2: math.exp(toy_log_joint(x1, x2, rho, c) - shift),
            lo, hi, tol=1.0e-11)
        if val <= 0:
            raise NumericalError(f"toy inner integral vanished at x1={x1}")
        logvals[idx] = shift + math.log(val)
    return MarginalDensity.from_log(np.asarray(grid, dtype=np.float64), logvals)


def toy_gaussian_approx(rho, c, grid=None):
    """Marginal of x1 under the joint-mode Gaussian approximation."""
    _toy_check(rho, c)
    mode, H = _toy_mode_hessian(rho, c)
    sd = math.sqrt(np.linalg.inv(H)[0, 0])
    if grid is None:
        return gaussian_marginal(mode[0], sd)
    grid = np.asarray(grid, dtype=np.float64)
    return MarginalDensity.from_log(grid, -0.5 * ((grid - mode[0]) / sd) ** 2)


def toy_laplace_marginal(rho, c, grid=None):
    """Profile marginal of x1: maximize over x2, 1-D Gaussian denominator."""
    _toy_check(rho, c)
    if grid is None:
        grid = toy_default_grid(rho, c)
    grid = np.asarray(grid, dtype=np.float64)
    prec0 = 1.0 / (1.0 - rho * rho)
    x2 = rho * grid  # conditional means ignoring the tilt: good start
    # Newton with gradient-sign bracketing: the target is strictly concave,
    # so any overshoot flips the gradient sign and bisection takes over.
    lo = np.full(grid.size, -np.inf)
    hi = np.full(grid.size, np.inf)
    converged = False
    for _ in range(300):
        s = 1.0 / (1.0 + np.exp(-c * x2))
        g = -(x2 - rho * grid) * prec0 + c * (1.0 - s)
        h = prec0 + c * c * s * (1.0 - s)
        lo = np.where(g > 0, np.maximum(lo, x2), lo)
        hi = np.where(g < 0, np.minimum(hi, x2), hi)
        prop = x2 + g / h
        outside = (prop <= lo) | (prop >= hi)
        both = np.isfinite(lo) & np.isfinite(hi)
        mid = 0.5 * (np.where(both, lo, 0.0) + np.where(both, hi, 0.0))
        prop = np.where(outside & both, mid, prop)
        prop = np.where(outside & ~both, x2 + np.clip(g / h, -2.0, 2.0), prop)
        moved = np.abs(prop - x2).max()
        x2 = prop
        if moved < 1.0e-13:
            converged = True
            break
    if not converged:
        raise NumericalError("toy conditional mode search did not converge")
    s = 1.0 / (1.0 + np.exp(-c * x2))
    h = prec0 + c * c * s * (1.0 - s)
    logvals = toy_log_joint(grid, x2, rho, c) - 0.5 * np.log(h)
    return MarginalDensity.from_log(grid, logvals)


# ----------------------------------------------------------------------
# Error-rate demonstrator: Gamma-integral Laplace approximation
# ----------------------------------------------------------------------

def laplace_integral_demo(n_values=(4, 8, 16, 32, 64, 128, 256)):
    """Relative error of the Laplace approximation of ∫ x^n e^{-x} dx.

    The integrand peaks at x=n with curvature -1/n, so the Gaussian
    substitute integrates to n^n e^{-n} sqrt(2 pi n); the exact value is
    Gamma(n+1).  Returns a list of (n, relative_error) rows — the error is
    negative and decays like -1/(12 n).
    """
    rows = []
    for n in n_values:
        if n <= 0:
            raise ValueError("n must be positive")
        log_exact = math.lgamma(n + 1.0)
        log_approx = n * math.log(n) - n + 0.5 * math.log(2.0 * math.pi * n)
        rows.append((n, math.expm1(log_approx - log_exact)))
    return rows


def loglog_slope(rows):
    """Least-squares slope of log|err| against log n."""
    n = np.log([r[0] for r in rows])
    e = np.log([abs(r[1]) for r in rows])
    return float(np.polyfit(n, e, 1)[0])


# ----------------------------------------------------------------------
# Dense tensor-grid enumeration for tiny models
# ----------------------------------------------------------------------

def _simpson_weights(x):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 1:
        return np.ones(1)
    if x.size % 2 == 0 or x.size < 3:
        raise ValueError("enumeration axes need an odd number (>= 3) of points")
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h):
        raise ValueError("enumeration axes must be uniformly spaced")
    w = np.ones(x.size)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


class EnumeratedPosterior:
    """Normalized joint mass on a (theta x structural-latent) tensor grid."""

    def __init__(self, model, theta_axes, x_axes, mass, design):
        self.model = model
        self.theta_axes = theta_axes
        self.x_axes = x_axes
        self.mass = mass
        self.design = design        # eta = design @ structural

    def _axis_marginal(self, axes_list, axis_offset, j):
        other = tuple(a for a in range(self.mass.ndim) if a != axis_offset + j)
        collapsed = self.mass.sum(axis=other)
        grid = axes_list[j]
        dens = collapsed / _simpson_weights(grid)
        return MarginalDensity(grid, dens)

    def theta_marginal(self, j):
        return self._axis_marginal(self.theta_axes, 0, j)

    def structural_marginal(self, j):
        return self._axis_marginal(self.x_axes, len(self.theta_axes), j)

    def latent_marginal(self, i, num=201):
        """Marginal of latent coordinate i in pipeline numbering.

        Indices below n are linear-predictor entries, computed as the
        pushforward of the structural coordinates through the design row
        (the tiny-noise limit); indices at or above n map directly to
        structural coordinates.
        """
        n = self.model.layout.n
        if i >= n:
            return self.structural_marginal(i - n)
        row = self.design[i]
        nz = np.flatnonzero(np.abs(row) > 0)
        if nz.size == 1 and abs(row[nz[0]] - 1.0) < 1e-14:
            return self.structural_marginal(int(nz[0]))
        # general pushforward: deposit cell mass onto a fine linear grid
        k_theta = len(self.theta_axes)
        w_struct = self.mass.sum(axis=tuple(range(k_theta)))
        mesh = np.meshgrid(*self.x_axes, indexing="ij")
        eta = sum(row[a] * mesh[a] for a in range(len(self.x_axes))).ravel()
        w = w_struct.ravel()
        lo, hi = eta.min(), eta.max()
        grid = np.linspace(lo, hi, num)
        h = grid[1] - grid[0]
        pos = np.clip((eta - lo) / h, 0, num - 1 - 1e-9)
        left = pos.astype(np.int64)
        frac = pos - left
        dens = np.zeros(num)
        np.add.at(dens, left, w * (1.0 - frac))
        np.add.at(dens, left + 1, w * frac)
        return MarginalDensity(grid, dens / h)


def dense_posterior_enumeration(model, theta_axes, x_axes):
    """Exhaustive posterior evaluation on a tensor grid (tiny models only).

    ``theta_axes``: one uniformly spaced odd-length grid per free
    hyperparameter; ``x_axes``: one per structural latent coordinate (the
    non-predictor entries, in layout order).  The linear-predictor entries
    are treated as deterministic given the structural coordinates — the
    tiny-noise limit of the joint model.
    """
    if model.constraints is not None:
        raise NumericalError("enumeration does not handle linear constraints")
    layout = model.layout
    n, dim = layout.n, layout.dim
    d = dim - n
    if len(theta_axes) != model.n_theta:
        raise ValueError(f"need {model.n_theta} theta axes, got {len(theta_axes)}")
    if len(x_axes) != d:
        raise ValueError(f"need {d} structural axes, got {len(x_axes)}")
    theta_axes = [np.asarray(a, dtype=np.float64) for a in theta_axes]
    x_axes = [np.asarray(a, dtype=np.float64) for a in x_axes]
    cells = int(np.prod([a.size for a in theta_axes + x_axes]))
    if cells > ENUMERATION_CELL_CAP:
        raise NumericalError(
            f"enumeration grid has {cells} cells, over the cap "
            f"{ENUMERATION_CELL_CAP}")

    # design matrix: eta = design @ structural
    design = np.zeros((n, d))
    pos = 0
    for block in layout.blocks:
        if block.name == "eta":
            continue
        if block.name == "mu":
            design[:, pos] = 1.0
        elif block.name.startswith("beta."):
            design[:, pos] = layout.covariates[block.name[len("beta."):]]
        else:
            A = layout.mapping_matrix(block.name)
            design[:, pos:pos + block.size] = A
        pos += block.size
    obs = np.flatnonzero(layout.obs_mask)
    y_obs = layout.y[obs]

    x_mesh = np.meshgrid(*x_axes, indexing="ij") if d else []
    x_flat = np.column_stack([m.ravel() for m in x_mesh]) if d else np.zeros((1, 0))
    eta_obs = x_flat @ design[obs].T

    theta_shape = tuple(a.size for a in theta_axes)
    x_shape = tuple(a.size for a in x_axes)
    logmass = np.empty(theta_shape + (x_flat.shape[0],))
    for t_idx in itertools.product(*(range(s) for s in theta_shape)):
        theta = np.array([theta_axes[j][t_idx[j]] for j in range(len(theta_axes))])
        Q_struct = _structural_precision(model, theta)
        sign, logdet = np.linalg.slogdet(Q_struct)
        if sign <= 0:
            raise NumericalError("structural prior precision not positive definite")
        quad_form = np.einsum("ci,ij,cj->c", x_flat, Q_struct, x_flat)
        family = model.family_at(theta)
        lik = family.loglik(y_obs[None, :], eta_obs).sum(axis=1)
        logmass[t_idx] = (model.log_prior_theta(theta) + 0.5 * logdet
                          - 0.5 * quad_form + lik)

    logmass = logmass.reshape(theta_shape + x_shape)
    weights = 1.0
    for axis_grid in theta_axes + x_axes:
        w = _simpson_weights(axis_grid)
        weights = np.multiply.outer(weights, w) if np.ndim(weights) else w
    mass = np.exp(logmass - logmass.max()) * weights
    mass /= mass.sum()
    return EnumeratedPosterior(model, theta_axes, x_axes, mass, design)


def _structural_precision(model, theta):
    """Prior precision of the non-predictor coordinates (no coupling noise)."""
    layout = model.layout
    n, d = layout.n, layout.dim - layout.n
    full = model.full_hyper_vector(theta)
    Q = np.zeros((d, d))
    pos = 0
    for block in layout.blocks:
        if block.name == "eta":
            continue
        if block.name == "mu" or block.name.startswith("beta."):
            Q[pos, pos] = model.fixed_effect_prec
            pos += 1
            continue
        comp = model.spec.component(block.name)
        Qk = model._component_precision(comp, full).to_dense()
        Q[pos:pos + block.size, pos:pos + block.size] = Qk
        pos += block.size
    return Q
