"""End-to-end driver: explore theta, build per-point latent marginals, mix.

``fit`` strings the pieces together the way the command-line tool uses them:
locate the hyperparameter mode, pick integration points, compute each latent
marginal at every point under the requested approximation strategy, average
the densities under the point weights, and derive hyperparameter marginals on
their natural scales.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .components import theta_to_correlation
from .exploration import (DEFAULT_CCD_F, DEFAULT_DIFF_LOGDENS, DEFAULT_DZ,
                          find_theta_mode, log_marginal_likelihood,
                          select_strategy, theta_marginal)
from .inference import (LaplaceProfiler, gaussian_approximation,
                        latent_marginal_gaussian,
                        latent_marginal_laplace_density,
                        latent_marginal_simplified_laplace)
from .marginals import gaussian_marginal, mix_over_theta
from .model import AssembledModel, build_model

STRATEGIES = ("gaussian", "simplified-laplace", "laplace")


def _natural_scale(hyper, density):
    """Map an internal-scale hyperparameter density to its reported scale."""
    if hyper.role == "prec":
        name = f"precision.{hyper.comp}"
        out = density.transform(np.exp, np.exp)
    else:
        name = f"rho.{hyper.comp}"
        phi = np.vectorize(theta_to_correlation)
        out = density.transform(phi, lambda t: 0.5 * (1.0 - phi(t) ** 2))
    return name, out


@dataclass
class FitResult:
    """Everything a run produces, before any files are written."""

    model: AssembledModel
    strategy: str
    exploration: object
    latent_marginals: dict
    hyper_marginals: dict                  # natural scale, keyed by report name
    hyper_marginals_internal: dict         # theta scale, keyed by theta name
    log_marginal_likelihood: float = None
    timings: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    # Accuracy warnings from the skew-Normal correction (coordinate index,
    # cap hit, fit residual); informational, never a convergence failure.
    sla_warnings: list = field(default_factory=list)

    def summary_rows(self):
        rows = []
        for name, dens in self.latent_marginals.items():
            rows.append({"name": name, **dens.summary()})
        for name, dens in self.hyper_marginals.items():
            rows.append({"name": name, **dens.summary()})
        return rows

    @property
    def converged(self):
        return all(self.flags.values())


def _point_marginals(model, theta, targets, strategy, sla_flags=None):
    ga = gaussian_approximation(model, theta)
    if strategy == "gaussian":
        return [latent_marginal_gaussian(ga, i) for i in targets], ga
    prof = LaplaceProfiler(model, theta, ga=ga)
    out = []
    if strategy == "laplace":
        for i in targets:
            out.append(latent_marginal_laplace_density(model, ga, i,
                                                       profiler=prof))
    else:
        for i in targets:
            sn = latent_marginal_simplified_laplace(model, ga, i, profiler=prof)
            if sla_flags is not None and (sn.skew_capped or sn.fit_residual > 1e-3):
                sla_flags.append((i, sn.skew_capped, sn.fit_residual))
            out.append(sn)
    return out, ga


def fit(model, data=None, family=None, strategy="simplified-laplace",
        int_strategy="auto", dz=DEFAULT_DZ, diff_logdens=DEFAULT_DIFF_LOGDENS,
        f_ccd=DEFAULT_CCD_F, targets="structural", threads=1, **model_kwargs):
    """Run the full pipeline; ``model`` may be a formula string plus data.

    ``targets`` selects which latent coordinates get marginals:
    "structural" (default) covers the intercept, fixed effects, and model
    components; "all" additionally covers every linear-predictor entry.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown approximation strategy {strategy!r}; "
                         f"choose from {', '.join(STRATEGIES)}")
    if not isinstance(model, AssembledModel):
        model = build_model(model, data, family=family, **model_kwargs)

    layout = model.layout
    if targets == "structural":
        target_idx = list(range(layout.n, layout.dim))
    elif targets == "all":
        target_idx = list(range(layout.dim))
    else:
        target_idx = list(targets)
    names = layout.latent_names()
    timings, flags = {}, {}

    t0 = time.perf_counter()
    theta_star, H = find_theta_mode(model)
    timings["mode_search"] = time.perf_counter() - t0
    flags["theta_mode"] = True

    t0 = time.perf_counter()
    exploration = select_strategy(model, int_strategy, dz=dz,
                                  diff_logdens=diff_logdens, f=f_ccd,
                                  mode_result=(theta_star, H))
    timings["exploration"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sla_flags = []
    work = [p.theta for p in exploration.points]
    if threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda th: _point_marginals(model, th, target_idx, strategy,
                                            sla_flags), work))
    else:
        results = [_point_marginals(model, th, target_idx, strategy, sla_flags)
                   for th in work]
    flags["latent_newton"] = all(ga.converged for _, ga in results)
    timings["latent_marginals"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    latent = {}
    for pos, i in enumerate(target_idx):
        per_point = [res[0][pos] for res in results]
        latent[names[i]] = mix_over_theta(exploration.points, per_point)
    timings["mixing"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    hyper_internal, hyper_natural = {}, {}
    k = exploration.k
    sd_fallback = None
    if k and (exploration.strategy == "eb" or len(exploration.points) < 2):
        sd_fallback = np.sqrt(np.diag(np.linalg.inv(H)))
    for j in range(k):
        if sd_fallback is not None:
            dens = gaussian_marginal(theta_star[j], float(sd_fallback[j]))
        else:
            dens = theta_marginal(exploration, j)
        hp = model.hypers[model._free[j]]
        hyper_internal[model.theta_names[j]] = dens
        name, nat = _natural_scale(hp, dens)
        hyper_natural[name] = nat
    timings["theta_marginals"] = time.perf_counter() - t0

    evidence = None
    if exploration.strategy != "eb":
        evidence = log_marginal_likelihood(exploration)

    return FitResult(
        model=model, strategy=strategy, exploration=exploration,
        latent_marginals=latent, hyper_marginals=hyper_natural,
        hyper_marginals_internal=hyper_internal,
        log_marginal_likelihood=evidence, timings=timings, flags=flags,
        sla_warnings=sla_flags)
