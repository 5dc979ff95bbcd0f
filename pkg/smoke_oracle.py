import math

import numpy as np

from lapgm.data import Dataset
from lapgm.model import build_model
from lapgm.oracle import (
    quad_1d, toy_true_marginal, toy_gaussian_approx, toy_laplace_marginal,
    toy_default_grid, laplace_integral_demo, loglog_slope,
    dense_posterior_enumeration)
from lapgm.marginals import tv_distance

# ---------- quad_1d ----------------------------------------------------------
v, e = quad_1d(lambda x: 1.0, 0.0, 1.0)
assert abs(v - 1.0) < 1e-12
v, e = quad_1d(lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi), -6, 6)
assert abs(v - math.erf(6 / math.sqrt(2))) < 1e-12  # true +/-6 sd mass
v, e = quad_1d(lambda x: math.exp(-x), 0.0, 50.0)
assert abs(v - 1.0) < 1e-9
print("quad_1d ok")

# ---------- toy: exactness and orderings -------------------------------------
grid0 = toy_default_grid(0.0, 10.0)
t0 = toy_true_marginal(0.0, 10.0, grid0)
l0 = toy_laplace_marginal(0.0, 10.0, grid0)
print("rho=0 TV(laplace, truth):", tv_distance(t0, l0))
assert tv_distance(t0, l0) < 1e-6

tvs_g, tvs_l = {}, {}
for rho in (0.05, 0.4, 0.8, 0.95):
    grid = toy_default_grid(rho, 10.0)
    truth = toy_true_marginal(rho, 10.0, grid)
    gauss = toy_gaussian_approx(rho, 10.0, grid)
    lap = toy_laplace_marginal(rho, 10.0, grid)
    tvs_g[rho] = tv_distance(truth, gauss)
    tvs_l[rho] = tv_distance(truth, lap)
    print(f"rho={rho}: TV(gauss)={tvs_g[rho]:.5f} TV(laplace)={tvs_l[rho]:.5f}")
    assert tvs_l[rho] < tvs_g[rho]
assert tvs_l[0.05] < 0.02 and tvs_l[0.95] < 0.02
assert max(tvs_l[0.4], tvs_l[0.8]) > max(tvs_l[0.05], tvs_l[0.95])
grid999 = toy_default_grid(0.999, 10.0)
tv999 = tv_distance(toy_true_marginal(0.999, 10.0, grid999),
                    toy_laplace_marginal(0.999, 10.0, grid999))
print("rho=0.999 TV:", tv999, "vs rho=0.8:", tvs_l[0.8])
assert tv999 < tvs_l[0.8]

# skewness of the truth at rho=0.5 is positive; Gaussian misses the location
grid5 = toy_default_grid(0.5, 10.0)
t5 = toy_true_marginal(0.5, 10.0, grid5)
g5 = toy_gaussian_approx(0.5, 10.0, grid5)
print("truth skewness:", t5.skewness(), "mean offset:", abs(t5.mean() - g5.mean()))
assert t5.skewness() > 0
assert abs(t5.mean() - g5.mean()) > 0.01

# c -> 0 limit: both collapse to N(0,1)
gridc = np.linspace(-6, 6, 401)
tc = toy_true_marginal(0.3, 1e-8, gridc)
from lapgm.marginals import MarginalDensity
std = MarginalDensity(gridc, np.exp(-0.5 * gridc**2))
assert tv_distance(tc, std) < 1e-6
print("c->0 limit ok")

# ---------- Stirling demonstrator --------------------------------------------
rows = laplace_integral_demo((4, 8, 16, 32, 64, 128, 256))
err8 = dict((n, r) for n, r in rows)[8]
print("rows:", [(n, f"{r:.5f}") for n, r in rows])
print("slope:", loglog_slope(rows))
assert abs(err8 - (-1.0 / 96.0)) < 0.2 * (1.0 / 96.0)
assert -1.2 < loglog_slope(rows) < -0.8
assert abs(rows[-1][1]) < abs(rows[2][1])
# ratio convergence: n * rel_error -> -1/12
ratios = [n * r for n, r in rows]
print("n*rel:", [f"{x:.5f}" for x in ratios])
assert abs(ratios[-1] - (-1.0 / 12.0)) < 1e-3

# ---------- enumeration: conjugate closed form -------------------------------
rng = np.random.default_rng(3)
n, m = 3, 2
idx = np.array([1.0, 1.0, 2.0])
y = np.array([0.4, -0.3, 0.9])
data = Dataset({"y": y, "g": idx})
model = build_model(
    'y ~ -1 + f(g, model="iid", hyper.prec.fixed=TRUE, hyper.prec.initial=0.0)',
    data, family="gaussian", tau_eps=1e5,
    obs_hyper={"fixed": True, "initial": 0.0})
# closed form: u_j | y ~ N(S y_j / (S+1) ... ) for unit precisions:
# posterior prec = 1 + n_j, mean = sum(y_j)/(1 + n_j)
axes = [np.linspace(-4, 4, 161), np.linspace(-4, 4, 161)]
enum = dense_posterior_enumeration(model, [], axes)
m_u1 = enum.structural_marginal(0)
mean_cf = (0.4 - 0.3) / 3.0
sd_cf = 1.0 / math.sqrt(3.0)
print("enum u1:", m_u1.summary(), "closed form mean/sd:", mean_cf, sd_cf)
assert abs(m_u1.mean() - mean_cf) < 1e-3
assert abs(m_u1.sd() - sd_cf) < 1e-3
m_eta0 = enum.latent_marginal(0)
assert abs(m_eta0.mean() - mean_cf) < 1e-3

# ---------- enumeration vs pipeline on a Poisson model (criterion-10 shape) --
datap = Dataset({"y": np.array([2.0, 1.0, 4.0]), "g": np.array([1.0, 1.0, 2.0])})
modelp = build_model('y ~ -1 + f(g, model="iid", hyper.prec.prior="pc.prec", '
                     'hyper.prec.param=c(1, 0.01), hyper.prec.initial=1.0)',
                     datap, family="poisson", tau_eps=1e5)
assert modelp.n_theta == 1
enump = dense_posterior_enumeration(
    modelp, [np.linspace(-3.0, 6.0, 121)],
    [np.linspace(-3.5, 3.5, 141), np.linspace(-3.0, 4.0, 141)])
tm = enump.theta_marginal(0)
print("enum theta summary:", tm.summary())
u0 = enump.structural_marginal(0)
print("enum u1 summary:", u0.summary())
assert abs(tm.integral() - 1.0) < 1e-9
assert abs(u0.integral() - 1.0) < 1e-9
print("ALL ORACLE SMOKE TESTS PASSED")
