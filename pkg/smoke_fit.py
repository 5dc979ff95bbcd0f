import math
import time

import numpy as np

from lapgm.data import Dataset
from lapgm.fit import fit
from lapgm.marginals import tv_distance, MarginalDensity
from lapgm.model import build_model

# ---------- criterion-1 rehearsal: conjugate n=50, all three strategies ------
rng = np.random.default_rng(42)
n, m = 50, 10
idx = np.tile(np.arange(1, m + 1), n // m).astype(float)
u_true = rng.normal(scale=0.5, size=m)
y = u_true[(idx - 1).astype(int)] + rng.normal(scale=0.5, size=n)
data = Dataset({"y": y, "g": idx})

tau_eps = 1e5
model = build_model(
    'y ~ -1 + f(g, model="iid", hyper.prec.fixed=TRUE, hyper.prec.initial=0.3)',
    data, family="gaussian", tau_eps=tau_eps,
    obs_hyper={"fixed": True, "initial": 1.2})

# closed-form joint posterior: P = Q + diag(c), c = tau_obs on eta rows
Q = model.assemble(model.theta_init).to_dense()
tau_obs = math.exp(1.2)
P = Q.copy()
P[np.arange(n), np.arange(n)] += tau_obs
rhs = np.zeros(model.layout.dim)
rhs[:n] = tau_obs * y
mean_cf = np.linalg.solve(P, rhs)
V = np.linalg.inv(P)

t_start = time.perf_counter()
worst = {}
for strat in ("gaussian", "simplified-laplace", "laplace"):
    res = fit(model, strategy=strat, targets="all")
    names = model.layout.latent_names()
    tv_max = 0.0
    for i in range(model.layout.dim):
        dens = res.latent_marginals[names[i]]
        sd_i = math.sqrt(V[i, i])
        grid = dens.x
        cf = MarginalDensity(grid, np.exp(-0.5 * ((grid - mean_cf[i]) / sd_i) ** 2))
        tv_max = max(tv_max, tv_distance(dens, cf))
    worst[strat] = tv_max
    print(f"{strat}: max TV vs closed form = {tv_max:.3e}")
    assert tv_max < 1e-5
elapsed = time.perf_counter() - t_start
print(f"conjugate all-strategies runtime: {elapsed:.2f}s")
assert elapsed < 3.0  # acceptance budget is 1 s per strategy

# ---------- criterion-7 rehearsal: Poisson n=50, m=10 ------------------------
rng = np.random.default_rng(1234)
w = rng.normal(scale=1.0 / 3.0, size=n)
u_true = rng.normal(scale=0.25, size=m)
eta = 0.0 + 1.0 * w + u_true[(idx - 1).astype(int)]
y_pois = rng.poisson(np.exp(eta)).astype(float)
datap = Dataset({"y": y_pois, "w": w, "idx": idx})

t_start = time.perf_counter()
res_sla = fit('y ~ 1 + w + f(idx, model="iid")', datap, family="poisson")
res_fl = fit('y ~ 1 + w + f(idx, model="iid")', datap, family="poisson",
             strategy="laplace")
res_eb = fit('y ~ 1 + w + f(idx, model="iid")', datap, family="poisson",
             int_strategy="eb")
elapsed = time.perf_counter() - t_start
rows = res_sla.summary_rows()
print("summary rows:", len(rows), [r["name"] for r in rows])
assert len(rows) == 13
assert rows[0]["name"] == "mu" and rows[1]["name"] == "beta.w"
assert rows[-1]["name"] == "precision.idx"

tv_u1 = tv_distance(res_sla.latent_marginals["u... placeholder"]
                    if False else res_sla.latent_marginals["idx[1]"],
                    res_fl.latent_marginals["idx[1]"])
print("TV(sla u1, laplace u1):", tv_u1)
assert tv_u1 < 0.01

var_mixed = res_sla.latent_marginals["idx[1]"].var()
var_eb = res_eb.latent_marginals["idx[1]"].var()
print("var mixed:", var_mixed, "var eb:", var_eb)
assert var_mixed > var_eb
print("strategy:", res_sla.exploration.strategy, "points:",
      len(res_sla.exploration.points))
print("evidence:", res_sla.log_marginal_likelihood)
assert res_eb.log_marginal_likelihood is None
print(f"poisson three-fit runtime: {elapsed:.2f}s")
print("flags:", res_sla.flags, res_fl.flags)
assert res_sla.converged and res_fl.converged
# threads smoke: same result with 4 threads
res_thr = fit('y ~ 1 + w + f(idx, model="iid")', datap, family="poisson",
              threads=4)
tv_thr = tv_distance(res_thr.latent_marginals["idx[1]"],
                     res_sla.latent_marginals["idx[1]"])
print("threaded equivalence TV:", tv_thr)
assert tv_thr < 1e-12
print("ALL FIT SMOKE TESTS PASSED")
