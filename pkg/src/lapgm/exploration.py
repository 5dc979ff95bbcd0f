"""Hyperparameter-space exploration.

The hyperparameter posterior is explored in standardized coordinates: with
theta* the mode and H the negative Hessian of the log posterior there,
H = E diag(lam) E' gives the map theta(z) = theta* + E diag(lam^{-1/2}) z
under which the log posterior is approximately -|z|^2/2.  Three point-set
strategies operate in z-space: the mode alone (eb), an axis-walked dense grid
(grid), and a center-plus-sphere composite design (ccd).  The same point sets
drive the mixture over theta, the theta marginals, and the marginal
likelihood estimate.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize
from scipy.special import logsumexp

from .errors import ConvergenceError, NumericalError
from .inference import log_posterior_theta
from .marginals import MarginalDensity, gaussian_marginal

GRID_POINT_CAP = 100_000
DEFAULT_DZ = 0.75
DEFAULT_DIFF_LOGDENS = 6.0
DEFAULT_CCD_F = 1.1


@dataclass
class ThetaPoint:
    """One integration point in hyperparameter space."""

    theta: np.ndarray
    z: np.ndarray
    log_post: float
    weight: float = 0.0
    design_weight: float = 1.0


@dataclass
class ThetaExploration:
    """A weighted point set plus the standardization that produced it."""

    strategy: str
    points: list
    theta_star: np.ndarray
    hessian: np.ndarray
    M: np.ndarray                 # theta = theta_star + M @ z
    logdet_H: float
    dz: float = None
    diff_logdens: float = None
    f: float = None

    @property
    def k(self):
        return self.theta_star.size

    def weights(self):
        return np.array([p.weight for p in self.points])

    def theta_at(self, z):
        return self.theta_star + self.M @ np.asarray(z, dtype=np.float64)


def _lp_callable(model):
    if callable(model):
        return model
    return lambda theta: log_posterior_theta(model, theta)


def _fd_gradient(fn, x, h=1.0e-4):
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def _fd_hessian(fn, x, h=1.0e-3):
    k = x.size
    H = np.empty((k, k))
    f0 = fn(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h
        H[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / (h * h)
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h
            H[i, j] = H[j, i] = (
                fn(x + ei + ej) - fn(x + ei - ej)
                - fn(x - ei + ej) + fn(x - ei - ej)
            ) / (4.0 * h * h)
    return 0.5 * (H + H.T)


def find_theta_mode(model, theta0=None, grad_step=1.0e-4, hess_step=1.0e-3):
    """Locate the hyperparameter posterior mode and its negative Hessian.

    ``model`` may be an AssembledModel or any callable theta -> log posterior
    (the latter requires ``theta0`` to fix the dimension)."""
    lp = _lp_callable(model)
    if theta0 is not None:
        x0 = np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    elif not callable(model) or hasattr(model, "theta_init"):
        x0 = np.asarray(model.theta_init, dtype=np.float64).copy()
    else:
        raise ValueError("theta0 is required when passing a bare function")
    k = x0.size
    if k > 20:
        raise ValueError(f"{k} hyperparameters exceed the supported limit of 20")
    if k == 0:
        return x0, np.zeros((0, 0))

    neg = lambda t: -lp(t)
    res = minimize(neg, x0, jac=lambda t: -_fd_gradient(lp, t, grad_step),
                   method="BFGS", options={"gtol": 1.0e-6, "maxiter": 200})
    x = res.x

    # Newton polish on finite differences: exact for quadratic surfaces and
    # tightens the BFGS solution to the stated gradient tolerance.
    fx = lp(x)
    for _ in range(20):
        g = _fd_gradient(lp, x, grad_step)
        if np.abs(g).max() < 1.0e-7:
            break
        H = _fd_hessian(lp, x, hess_step)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        alpha = 1.0
        improved = False
        for _ in range(20):
            x_new = x + alpha * step
            f_new = lp(x_new)
            if f_new >= fx - 1e-10 * max(1.0, abs(fx)):
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
        x, fx = x_new, f_new

    g = _fd_gradient(lp, x, grad_step)
    if np.abs(g).max() >= 1.0e-5:
        raise ConvergenceError(
            f"mode search stalled with gradient max-norm {np.abs(g).max():.3g}")
    H = -_fd_hessian(lp, x, hess_step)
    evals = np.linalg.eigvalsh(H)
    if evals.min() <= 0:
        raise NumericalError(
            "negative Hessian at the located mode is not positive definite; "
            f"eigenvalues: {np.array2string(evals, precision=6)}")
    return x, H


def _standardize(theta_star, H):
    if H.size == 0:
        return np.zeros((0, 0)), 0.0
    lam, E = np.linalg.eigh(H)
    if lam.min() <= 0:
        raise NumericalError(
            "exploration requires a positive definite Hessian; eigenvalues: "
            f"{np.array2string(lam, precision=6)}")
    M = E * (1.0 / np.sqrt(lam))
    return M, float(np.sum(np.log(lam)))


def _normalize_weights(points, raw):
    raw = np.asarray(raw, dtype=np.float64)
    total = raw.sum()
    for p, w in zip(points, raw / total):
        p.weight = float(w)


def explore_grid(model, theta_star, H, dz=DEFAULT_DZ,
                 diff_logdens=DEFAULT_DIFF_LOGDENS, cap=GRID_POINT_CAP):
    """Axis-walked dense grid in z-space around the mode.

    Walks each +/- axis direction in steps of dz until the log posterior has
    dropped more than diff_logdens below the mode value, then fills the
    bounding box and keeps every point within the drop threshold (inclusive).
    """
    if dz <= 0 or diff_logdens < 0:
        raise ValueError("dz must be positive and diff_logdens nonnegative")
    lp = _lp_callable(model)
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=np.float64))
    k = theta_star.size
    M, logdet_H = _standardize(theta_star, H)

    cache = {}

    def lp_at(offset):
        val = cache.get(offset)
        if val is None:
            z = dz * np.asarray(offset, dtype=np.float64)
            val = lp(theta_star + M @ z) if k else lp(theta_star)
            cache[offset] = val
        return val

    origin = (0,) * k
    lp0 = lp_at(origin)
    tol = diff_logdens + 1.0e-12

    lo = np.zeros(k, dtype=np.int64)
    hi = np.zeros(k, dtype=np.int64)
    for axis in range(k):
        for sign, extents in ((1, hi), (-1, lo)):
            steps = 0
            while True:
                cand = [0] * k
                cand[axis] = sign * (steps + 1)
                if lp0 - lp_at(tuple(cand)) > tol:
                    break
                steps += 1
                if steps > cap:
                    raise NumericalError("grid axis walk exceeded the point cap")
            extents[axis] = steps

    total = int(np.prod(lo + hi + 1))
    if total > cap:
        raise NumericalError(
            f"grid would contain {total} points, exceeding the cap of {cap}")

    points = []
    for offset in itertools.product(
            *(range(-int(lo[a]), int(hi[a]) + 1) for a in range(k))):
        val = lp_at(offset)
        if lp0 - val <= tol:
            z = dz * np.asarray(offset, dtype=np.float64)
            points.append(ThetaPoint(
                theta=theta_star + (M @ z if k else 0.0), z=z,
                log_post=val, design_weight=dz ** k))
    lps = np.array([p.log_post for p in points])
    _normalize_weights(points, np.exp(lps - lps.max()))
    return points


def ccd_design(k, f=DEFAULT_CCD_F):
    """Central composite design on the sphere of radius f*sqrt(k).

    Returns (Z, weights): the center point first, then 2k axial points and a
    (fractional) factorial set, all on the sphere; weights satisfy
    sum(w) = 1 and sum(w * |z|^2) = k by construction.
    """
    if k < 1:
        raise ValueError("design dimension must be at least 1")
    if f <= 1.0:
        raise ValueError("scaling factor f must exceed 1 "
                         "(the center weight 1 - 1/f^2 must stay positive)")
    radius = f * math.sqrt(k)
    axial = np.zeros((2 * k, k))
    for j in range(k):
        axial[2 * j, j] = radius
        axial[2 * j + 1, j] = -radius
    if k <= 6:
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
    else:
        base = np.array(list(itertools.product((-1.0, 1.0), repeat=k - 1)))
        corners = np.column_stack([base, np.prod(base, axis=1)])
    factorial = f * corners
    sphere = np.vstack([axial, factorial])
    n_s = sphere.shape[0]
    w = 1.0 / (n_s * f * f)
    w0 = 1.0 - 1.0 / (f * f)
    Z = np.vstack([np.zeros((1, k)), sphere])
    weights = np.concatenate([[w0], np.full(n_s, w)])
    return Z, weights


def explore_ccd(model, theta_star, H, f=DEFAULT_CCD_F):
    """Center-plus-sphere design points with Gaussian-reweighted masses."""
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=np.float64))
    k = theta_star.size
    if k < 3:
        raise ValueError(
            "the ccd strategy needs at least 3 hyperparameters; "
            "use grid (or auto) below that")
    lp = _lp_callable(model)
    M, logdet_H = _standardize(theta_star, H)
    Z, design_w = ccd_design(k, f)
    points = []
    for z, w in zip(Z, design_w):
        theta = theta_star + M @ z
        points.append(ThetaPoint(theta=theta, z=z.copy(), log_post=lp(theta),
                                 design_weight=float(w)))
    lps = np.array([p.log_post for p in points])
    znorm = np.array([float(p.z @ p.z) for p in points])
    raw = design_w * np.exp(lps - lps.max() + 0.5 * znorm)
    _normalize_weights(points, raw)
    return points


def select_strategy(model, requested="auto", theta0=None, dz=DEFAULT_DZ,
                    diff_logdens=DEFAULT_DIFF_LOGDENS, f=DEFAULT_CCD_F,
                    mode_result=None, cap=GRID_POINT_CAP):
    """Resolve an integration strategy and produce its ThetaExploration."""
    if requested not in ("eb", "grid", "ccd", "auto"):
        raise ValueError(f"unknown integration strategy {requested!r}")
    theta_star, H = mode_result or find_theta_mode(model, theta0)
    k = theta_star.size
    M, logdet_H = _standardize(theta_star, H)
    lp = _lp_callable(model)

    resolved = requested
    if requested == "auto":
        resolved = "grid" if k <= 2 else "ccd"
    if k == 0 and resolved != "eb":
        resolved = "grid"

    if resolved == "eb" or k == 0:
        point = ThetaPoint(theta=theta_star, z=np.zeros(k),
                           log_post=lp(theta_star), weight=1.0,
                           design_weight=1.0)
        return ThetaExploration(
            strategy=resolved, points=[point], theta_star=theta_star,
            hessian=H, M=M, logdet_H=logdet_H)
    if resolved == "grid":
        points = explore_grid(model, theta_star, H, dz=dz,
                              diff_logdens=diff_logdens, cap=cap)
        return ThetaExploration(
            strategy="grid", points=points, theta_star=theta_star, hessian=H,
            M=M, logdet_H=logdet_H, dz=dz, diff_logdens=diff_logdens)
    points = explore_ccd(model, theta_star, H, f=f)
    return ThetaExploration(
        strategy="ccd", points=points, theta_star=theta_star, hessian=H,
        M=M, logdet_H=logdet_H, f=f)


def _spline_density(positions, masses, num=201):
    """Log-spline through node densities (mass / local spacing)."""
    order = np.argsort(positions)
    pos = positions[order]
    mass = masses[order]
    if pos.size < 4 or np.any(np.diff(pos) <= 0):
        return None
    dens = mass / np.gradient(pos)
    if np.any(dens <= 0):
        return None
    spline = CubicSpline(pos, np.log(dens))
    fine = np.linspace(pos[0], pos[-1], num)
    return MarginalDensity.from_log(fine, spline(fine))


def theta_marginal(exploration, j, num=201):
    """Posterior marginal of hyperparameter j from the exploration points."""
    k = exploration.k
    if not 0 <= j < k:
        raise IndexError(f"hyperparameter index {j} out of range [0, {k})")
    if exploration.strategy == "eb" or len(exploration.points) < 2:
        raise ValueError(
            "theta marginals need grid or ccd integration points")
    theta_star, M = exploration.theta_star, exploration.M

    if exploration.strategy == "grid":
        dz = exploration.dz
        groups = {}
        for p in exploration.points:
            key = int(round(p.z[j] / dz)) if k > 1 else int(round(p.z[0] / dz))
            acc = groups.setdefault(key, [0.0, 0.0])
            acc[0] += p.weight
            acc[1] += p.weight * p.theta[j]
        keys = sorted(groups)
        mass = np.array([groups[key][0] for key in keys])
        pos = np.array([groups[key][1] / groups[key][0] for key in keys])
        out = _spline_density(pos, mass, num=num)
        if out is None:
            # too few nodes for a spline: Gaussian fallback from the Hessian
            sd = math.sqrt(np.linalg.inv(exploration.hessian)[j, j])
            return gaussian_marginal(theta_star[j], sd, num=num)
        return out

    # ccd: per-axis one-sided Gaussian scales from the axial points, mapped
    # to theta_j as a two-piece Gaussian.
    f = exploration.f
    radius = f * math.sqrt(k)
    lp0 = None
    sig = np.ones((k, 2))  # [axis, (minus, plus)]
    for p in exploration.points:
        nz = np.flatnonzero(p.z)
        if nz.size == 0:
            lp0 = p.log_post
    if lp0 is None:
        raise ValueError("ccd exploration lacks its center point")
    for p in exploration.points:
        nz = np.flatnonzero(p.z)
        if nz.size != 1 or abs(abs(p.z[nz[0]]) - radius) > 1e-9 * radius:
            continue
        axis = int(nz[0])
        side = 1 if p.z[axis] > 0 else 0
        drop = max(lp0 - p.log_post, 1.0e-8)
        sig[axis, side] = radius / math.sqrt(2.0 * drop)
    row = M[j]
    var_plus = float(np.sum(row ** 2 * np.where(row >= 0, sig[:, 1], sig[:, 0]) ** 2))
    var_minus = float(np.sum(row ** 2 * np.where(row >= 0, sig[:, 0], sig[:, 1]) ** 2))
    s_plus, s_minus = math.sqrt(var_plus), math.sqrt(var_minus)
    center = theta_star[j]
    span = 6.0 * max(s_plus, s_minus)
    x = np.linspace(center - span, center + span, num)
    s = np.where(x >= center, s_plus, s_minus)
    dens = np.exp(-0.5 * ((x - center) / s) ** 2)
    return MarginalDensity(x, dens)


def log_marginal_likelihood(exploration):
    """Log normalizing constant of the hyperparameter posterior."""
    pts = exploration.points
    k = exploration.k
    if exploration.strategy == "eb":
        raise ValueError(
            "the marginal likelihood is undefined under the eb strategy "
            "(a single mode point carries no volume information)")
    lps = np.array([p.log_post for p in pts])
    if exploration.strategy == "grid":
        vol = k * math.log(exploration.dz) if k and exploration.dz else 0.0
        return float(logsumexp(lps) + vol - 0.5 * exploration.logdet_H)
    zn = np.array([float(p.z @ p.z) for p in pts])
    dw = np.log(np.array([p.design_weight for p in pts]))
    return float(logsumexp(lps + 0.5 * zn + dw)
                 + 0.5 * k * math.log(2.0 * math.pi)
                 - 0.5 * exploration.logdet_H)
