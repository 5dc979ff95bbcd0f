"""Batch command-line interface.

``lapgm run`` reads a CSV dataset and a model formula, fits the model,
and writes per-quantity marginal densities, a summary table, the log
marginal likelihood, a JSON run record, and a gnuplot script into an
output directory.  ``lapgm simulate`` writes the synthetic Poisson
regression dataset used in the docs and tests, and ``lapgm toy``
tabulates the bivariate toy-model densities (exact, Gaussian, Laplace)
for replotting.

Options may come from a config file (flat ``key = value`` lines whose
keys mirror the flag names); explicit flags override the file.  Exit
status: 0 on a clean run, 1 if any convergence flag is false, 2 for
formula/option errors, 3 for data errors, 4 for numerical failures.
"""

import csv
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data import read_csv, write_csv
from .errors import DataError, FormulaError, NumericalError
from .exploration import DEFAULT_CCD_F, DEFAULT_DIFF_LOGDENS, DEFAULT_DZ
from .fit import STRATEGIES, fit
from .likelihoods import FAMILIES

INT_STRATEGIES = ("auto", "eb", "grid", "ccd")

# Effective defaults for `run`, echoed into run.json so a run can be
# reproduced from the artifact alone.
RUN_DEFAULTS = {
    "data": None,
    "formula": None,
    "family": "gaussian",
    "strategy": "simplified-laplace",
    "int_strategy": "auto",
    "dz": DEFAULT_DZ,
    "diff_logdens": DEFAULT_DIFF_LOGDENS,
    "f_ccd": DEFAULT_CCD_F,
    "out": "lapgm-out",
    "threads": 1,
    "seed": None,
}


def _fail(code, message):
    click.echo(f"lapgm: error: {message}", err=True)
    sys.exit(code)


def _read_config_file(path):
    """Flat key=value option file; keys mirror the flag names."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(2, f"config: cannot open {path}: {exc.strerror}")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            _fail(2, f"config: line {line_no}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in RUN_DEFAULTS:
            _fail(2, f"config: line {line_no}: unknown key {key.strip()!r}")
        values[key] = value.strip()
    return values


def _coerce(key, value):
    """Config-file strings -> the type the flag would have produced."""
    if value is None or not isinstance(value, str):
        return value
    if key in ("dz", "diff_logdens", "f_ccd"):
        try:
            return float(value)
        except ValueError:
            _fail(2, f"config: {key} must be a number, got {value!r}")
    if key in ("threads", "seed"):
        try:
            return int(value)
        except ValueError:
            _fail(2, f"config: {key} must be an integer, got {value!r}")
    return value


def _merge_run_config(flags, config_path):
    file_values = _read_config_file(config_path) if config_path else {}
    cfg = dict(RUN_DEFAULTS)
    for key in cfg:
        if key in file_values:
            cfg[key] = _coerce(key, file_values[key])
        if flags.get(key) is not None:
            cfg[key] = flags[key]
    if cfg["data"] is None:
        _fail(2, "run: no data file (give --data or a config entry)")
    if cfg["formula"] is None:
        _fail(2, "run: no model formula (give --formula or a config entry)")
    if cfg["strategy"] not in STRATEGIES:
        _fail(2, f"run: unknown strategy {cfg['strategy']!r}")
    if cfg["int_strategy"] not in INT_STRATEGIES:
        _fail(2, f"run: unknown int-strategy {cfg['int_strategy']!r}")
    if cfg["family"] not in FAMILIES:
        _fail(2, f"run: unknown family {cfg['family']!r}")
    if not cfg["dz"] > 0:
        _fail(2, f"run: dz must be positive, got {cfg['dz']}")
    if not cfg["diff_logdens"] > 0:
        _fail(2, f"run: diff-logdens must be positive, got {cfg['diff_logdens']}")
    if not cfg["f_ccd"] > 1:
        _fail(2, f"run: f-ccd must exceed 1, got {cfg['f_ccd']}")
    if cfg["threads"] < 1:
        _fail(2, f"run: threads must be at least 1, got {cfg['threads']}")
    return cfg


def _resolve_formula(spec):
    """An inline formula, or the contents of a file holding one."""
    path = Path(spec)
    if "~" not in spec and path.is_file():
        return path.read_text().strip()
    if path.is_file():
        return path.read_text().strip()
    return spec


def _write_plot_script(path, names):
    lines = [
        "# Posterior marginal overlays (gnuplot).",
        "# Each CSV under marginals/ holds one density as (x, density) rows.",
        "# To overlay another run (e.g. a different strategy), plot the same",
        "# file name from that run's directory on the same line.",
        "set datafile separator comma",
        "set style data lines",
        "set key top left",
        "set ylabel 'density'",
        "",
    ]
    for name in names:
        lines.append(f"set xlabel '{name}'")
        lines.append(f"plot 'marginals/{name}.csv' skip 1 using 1:2 title '{name}'")
        lines.append(f"pause -1 '{name} - press enter for the next plot'")
        lines.append("")
    Path(path).write_text("\n".join(lines))


@click.group()
@click.version_option(__version__)
def main():
    """Approximate Bayesian inference for latent Gaussian models."""


@main.command()
@click.option("--data", type=str, default=None, help="CSV data file.")
@click.option("--formula", type=str, default=None,
              help="Model formula, inline or a path to a file holding one.")
@click.option("--family", type=str, default=None,
              help=f"Observation family ({', '.join(FAMILIES)}).")
@click.option("--strategy", type=str, default=None,
              help=f"Latent marginal strategy ({', '.join(STRATEGIES)}).")
@click.option("--int-strategy", type=str, default=None,
              help=f"Hyperparameter integration ({', '.join(INT_STRATEGIES)}).")
@click.option("--dz", type=float, default=None,
              help="Grid step in standardized theta coordinates.")
@click.option("--diff-logdens", type=float, default=None,
              help="Log-density drop at which the grid stops.")
@click.option("--f-ccd", type=float, default=None,
              help="CCD design radius scale factor.")
@click.option("--out", type=str, default=None, help="Output directory.")
@click.option("--threads", type=int, default=None,
              help="Worker threads for per-theta-point work.")
@click.option("--seed", type=int, default=None,
              help="Echoed into run.json; inference itself is deterministic.")
@click.option("--config", "config_path", type=str, default=None,
              help="key=value option file; explicit flags override it.")
def run(config_path, **flags):
    """Fit a model and write marginals, summaries, and plots."""
    cfg = _merge_run_config(flags, config_path)
    started = time.perf_counter()
    try:
        data = read_csv(cfg["data"])
        formula = _resolve_formula(cfg["formula"])
        result = fit(formula, data,
                     family=cfg["family"],
                     strategy=cfg["strategy"],
                     int_strategy=cfg["int_strategy"],
                     dz=cfg["dz"],
                     diff_logdens=cfg["diff_logdens"],
                     f_ccd=cfg["f_ccd"],
                     threads=cfg["threads"])
    except FormulaError as exc:
        _fail(2, str(exc))
    except DataError as exc:
        _fail(3, str(exc))
    except NumericalError as exc:
        _fail(4, str(exc))

    outdir = Path(cfg["out"])
    margdir = outdir / "marginals"
    margdir.mkdir(parents=True, exist_ok=True)

    marginals = {**result.latent_marginals, **result.hyper_marginals}
    for name, dens in marginals.items():
        write_csv(margdir / f"{name}.csv", ["x", "density"],
                  [dens.x, dens.pdf])

    with open(outdir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "mean", "sd", "2.5%", "50%", "97.5%"])
        for row in result.summary_rows():
            writer.writerow([row["name"]] + [repr(float(row[k])) for k in
                                             ("mean", "sd", "q0.025",
                                              "q0.5", "q0.975")])

    if result.log_marginal_likelihood is not None:
        (outdir / "evidence.txt").write_text(
            f"{result.log_marginal_likelihood!r}\n")

    timings = dict(result.timings)
    timings["total"] = time.perf_counter() - started
    record = {
        "config": cfg,
        "theta_mode": [float(v) for v in result.exploration.theta_star],
        "theta_points": len(result.exploration.points),
        "int_strategy_used": result.exploration.strategy,
        "log_marginal_likelihood": result.log_marginal_likelihood,
        "timings": timings,
        "flags": result.flags,
        "sla_warnings": [
            {"coordinate": int(i), "skew_capped": bool(capped),
             "fit_residual": float(resid)}
            for i, capped, resid in result.sla_warnings],
    }
    (outdir / "run.json").write_text(json.dumps(record, indent=2) + "\n")

    _write_plot_script(outdir / "plot.gp", list(marginals))

    if not result.converged:
        bad = ", ".join(k for k, v in result.flags.items() if not v)
        click.echo(f"lapgm: warning: convergence flags false: {bad}", err=True)
        sys.exit(1)


@main.command()
@click.option("--n", type=int, default=50, show_default=True,
              help="Number of observations.")
@click.option("--m", type=int, default=10, show_default=True,
              help="Number of group levels.")
@click.option("--seed", type=int, required=True, help="RNG seed.")
@click.option("--intercept", type=float, default=0.0, show_default=True)
@click.option("--beta", type=float, default=1.0, show_default=True,
              help="Fixed-effect coefficient on w.")
@click.option("--sd-w", type=float, default=1.0 / 3.0,
              help="Covariate standard deviation.  [default: 1/3]")
@click.option("--sd-u", type=float, default=0.25, show_default=True,
              help="Group-effect standard deviation.")
@click.option("--out", type=str, default="data.csv", show_default=True,
              help="Output CSV path.")
def simulate(n, m, seed, intercept, beta, sd_w, sd_u, out):
    """Write a synthetic Poisson dataset (columns y, w, idx)."""
    if n < 1:
        _fail(2, f"simulate: n must be at least 1, got {n}")
    if m < 1:
        _fail(2, f"simulate: m must be at least 1, got {m}")
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, sd_w, size=n)
    u = rng.normal(0.0, sd_u, size=m)
    reps = -(-n // m)  # ceil: repeat 1..m until n rows are covered
    idx = np.tile(np.arange(1, m + 1), reps)[:n]
    eta = intercept + beta * w + u[idx - 1]
    y = rng.poisson(np.exp(eta))
    write_csv(out, ["y", "w", "idx"],
              [y.astype(np.float64), w, idx.astype(np.float64)])


@main.command()
@click.option("--rho", type=float, required=True,
              help="Latent correlation, in [0, 0.999].")
@click.option("--c", "c_scale", type=float, required=True,
              help="Likelihood tilt strength (positive).")
@click.option("--num", type=int, default=401, show_default=True,
              help="Number of grid points.")
@click.option("--out", type=str, default="toy.csv", show_default=True,
              help="Output CSV path.")
def toy(rho, c_scale, num, out):
    """Tabulate toy-model marginals: exact, Gaussian, Laplace."""
    from . import oracle

    if not 0.0 <= rho <= 0.999:
        _fail(2, f"toy: rho must lie in [0, 0.999], got {rho}")
    if not c_scale > 0:
        _fail(2, f"toy: c must be positive, got {c_scale}")
    if num < 3:
        _fail(2, f"toy: num must be at least 3, got {num}")
    try:
        grid = oracle.toy_default_grid(rho, c_scale, num=num)
        truth = oracle.toy_true_marginal(rho, c_scale, grid)
        gauss = oracle.toy_gaussian_approx(rho, c_scale, grid)
        laplace = oracle.toy_laplace_marginal(rho, c_scale, grid)
    except NumericalError as exc:
        _fail(4, str(exc))
    write_csv(out, ["x", "true", "gaussian", "laplace"],
              [grid, truth.pdf, gauss.pdf, laplace.pdf])


if __name__ == "__main__":
    main()
