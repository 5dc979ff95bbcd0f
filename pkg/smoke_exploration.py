import math

import numpy as np
from scipy.optimize import minimize_scalar

from lapgm.data import Dataset
from lapgm.model import build_model
from lapgm.exploration import (
    find_theta_mode, explore_grid, ccd_design, explore_ccd, select_strategy,
    theta_marginal, log_marginal_likelihood, ThetaExploration, _standardize)

# ---------- synthetic 1-D Gaussian surface ---------------------------------
sigma = 0.3
lp1 = lambda th: -0.5 * ((th[0] - 1.0) / sigma) ** 2
theta_star, H = find_theta_mode(lp1, theta0=[0.2])
print("1-D mode:", theta_star, "H:", H, "expect", 1 / sigma**2)
assert abs(theta_star[0] - 1.0) < 1e-6 and abs(H[0, 0] - 1 / sigma**2) < 1e-3

pts = explore_grid(lp1, theta_star, H, dz=1.0, diff_logdens=2.0)
zs = sorted(p.z[0] for p in pts)
print("grid z:", zs)
assert np.allclose(zs, [-2, -1, 0, 1, 2], atol=1e-6)

pts0 = explore_grid(lp1, theta_star, H, dz=1.0, diff_logdens=0.0)
assert len(pts0) == 1 and abs(pts0[0].weight - 1.0) < 1e-12

pts_fine = explore_grid(lp1, theta_star, H, dz=0.1, diff_logdens=20.0)
Ez2 = sum(p.weight * p.z[0] ** 2 for p in pts_fine)
print("E[z^2] =", Ez2, "npoints:", len(pts_fine))
assert abs(Ez2 - 1.0) < 0.05

expl = ThetaExploration(strategy="grid", points=pts_fine, theta_star=theta_star,
                        hessian=H, M=_standardize(theta_star, H)[0],
                        logdet_H=_standardize(theta_star, H)[1], dz=0.1,
                        diff_logdens=20.0)
ev = log_marginal_likelihood(expl)
truth = 0.5 * math.log(2 * math.pi * sigma**2)
print("grid evidence:", ev, "truth:", truth)
assert abs(ev - truth) < 1e-4

tm = theta_marginal(expl, 0)
s = tm.summary()
print("theta marginal:", s)
assert abs(s["mean"] - 1.0) < 1e-3 and abs(s["sd"] - sigma) < 2e-3

# ---------- CCD identities --------------------------------------------------
Z, w = ccd_design(3, 1.1)
print("k=3: n =", Z.shape[0], "w =", w[1], "w0 =", w[0])
assert Z.shape[0] == 15
assert abs(w[1] - 0.059032) < 1e-5 and abs(w[0] - 0.173554) < 1e-5
for k in range(3, 11):
    Z, w = ccd_design(k, 1.1)
    assert abs(w.sum() - 1.0) < 1e-12
    zz = (Z**2).sum(axis=1)
    assert abs(float(w @ zz) - k) < 1e-12
    # second-moment matrix is the identity
    S = (Z.T * w) @ Z
    assert np.abs(S - np.eye(k)).max() < 1e-12
print("CCD identities hold for k=3..10")

# ---------- 2-D correlated quadratic ----------------------------------------
A2 = np.array([[2.0, 0.6], [0.6, 1.0]])
t2 = np.array([0.5, -1.2])
lp2 = lambda th: -0.5 * (th - t2) @ A2 @ (th - t2)
th2, H2 = find_theta_mode(lp2, theta0=[0.0, 0.0])
print("2-D mode err:", np.abs(th2 - t2).max(), "H err:", np.abs(H2 - A2).max())
assert np.abs(th2 - t2).max() < 1e-6 and np.abs(H2 - A2).max() < 1e-5

# ---------- CCD exploration on an exact quadratic (k=3) ---------------------
A3 = np.diag([1.5, 0.8, 2.5])
lp3 = lambda th: -0.5 * th @ A3 @ th
th3, H3 = find_theta_mode(lp3, theta0=[0.3, -0.2, 0.1])
expl3 = select_strategy(lp3, requested="ccd", mode_result=(th3, H3))
assert expl3.strategy == "ccd" and len(expl3.points) == 15
ev3 = log_marginal_likelihood(expl3)
truth3 = 0.5 * 3 * math.log(2 * math.pi) - 0.5 * np.linalg.slogdet(A3)[1]
print("ccd evidence:", ev3, "truth:", truth3)
assert abs(ev3 - truth3) < 1e-6

tm3 = theta_marginal(expl3, 1)
s3 = tm3.summary()
print("ccd theta marginal j=1:", s3, "expect sd", 1 / math.sqrt(0.8))
assert abs(s3["mean"]) < 1e-6 and abs(s3["sd"] - 1 / math.sqrt(0.8)) < 2e-2

# ---------- strategy policies ------------------------------------------------
assert select_strategy(lp1, "eb", theta0=[0.4]).strategy == "eb"
assert len(select_strategy(lp1, "eb", theta0=[0.4]).points) == 1
assert select_strategy(lp1, "auto", theta0=[0.4]).strategy == "grid"
lp4 = lambda th: -0.5 * float(th @ th)
assert select_strategy(lp4, "auto", theta0=[0.1] * 4).strategy == "ccd"
try:
    log_marginal_likelihood(select_strategy(lp1, "eb", theta0=[0.4]))
    raise SystemExit("eb evidence should error")
except ValueError as exc:
    print("eb evidence rejected:", exc)

# ---------- conjugate Gaussian model: k=1 end-to-end -------------------------
rng = np.random.default_rng(11)
n, m = 30, 5
idx = rng.integers(0, m, size=n)
u_true = rng.normal(scale=1.0, size=m)
y = u_true[idx] + rng.normal(scale=0.5, size=n)
data = Dataset({"y": y, "g": idx + 1.0})
model = build_model(
    'y ~ -1 + f(g, model="iid", hyper.prec.fixed=TRUE, hyper.prec.initial=0.0)',
    data, family="gaussian", tau_eps=1e4,
    obs_hyper={"initial": 1.0})
assert model.n_theta == 1 and model.theta_names == ["log_prec:obs"]

from lapgm.inference import log_posterior_theta
from lapgm.model import DEFAULT_PREC_PRIOR
from lapgm.priors import gamma_log_prior

B = np.zeros((n, m))
B[np.arange(n), idx] = 1.0


def closed_form(theta):
    tau = math.exp(theta)
    # y ~ N(0, B B' + I/tau + tiny): use the exact latent marginal covariance
    Q = np.zeros((n + m, n + m))
    Q[:n, :n] = np.eye(n) * 1e4
    Q[:n, n:] = -1e4 * B
    Q[n:, :n] = -1e4 * B.T
    Q[n:, n:] = np.eye(m) + 1e4 * B.T @ B
    S = np.linalg.inv(Q)[:n, :n] + np.eye(n) / tau
    sign, logdet = np.linalg.slogdet(S)
    quad = y @ np.linalg.solve(S, y)
    return (-0.5 * (quad + logdet + n * math.log(2 * math.pi))
            + gamma_log_prior(theta, *DEFAULT_PREC_PRIOR.params))


res = minimize_scalar(lambda t: -closed_form(t), bounds=(-2, 5), method="bounded",
                      options={"xatol": 1e-10})
theta_cf = res.x
ths, Hs = find_theta_mode(model)
print("model mode:", ths[0], "closed-form argmax:", theta_cf)
assert abs(ths[0] - theta_cf) < 1e-4

lp_model = log_posterior_theta(model, ths)
lp_cf = closed_form(ths[0])
print("lp at mode: model", lp_model, "closed form", lp_cf, "diff", lp_model - lp_cf)
assert abs(lp_model - lp_cf) < 1e-6

expl_m = select_strategy(model, "grid", dz=0.1, diff_logdens=20.0,
                         mode_result=(ths, Hs))
ev_m = log_marginal_likelihood(expl_m)
# closed-form evidence by fine quadrature over theta
grid_t = np.linspace(ths[0] - 8 * math.sqrt(1 / Hs[0, 0]),
                     ths[0] + 8 * math.sqrt(1 / Hs[0, 0]), 1601)
vals = np.array([closed_form(t) for t in grid_t])
mx = vals.max()
ev_cf = mx + math.log(np.trapz(np.exp(vals - mx), grid_t))
print("model evidence:", ev_m, "quadrature evidence:", ev_cf, "diff", ev_m - ev_cf)
assert abs(ev_m - ev_cf) < 0.02

tm_m = theta_marginal(expl_m, 0)
mode_t = tm_m.mode()
print("theta-marginal mode:", mode_t, "vs", theta_cf)
assert abs(mode_t - theta_cf) < 2 * 0.1 / math.sqrt(Hs[0, 0])

print("ALL EXPLORATION SMOKE TESTS PASSED")
