"""Approximate Bayesian inference for latent Gaussian models.

Additive regression models with Gaussian/Poisson/binomial observations get a
sparse joint Gaussian precision; hyperparameters are integrated by Laplace
approximation over a deterministic design (grid or composite design), and
latent marginals come out Gaussian, skew-Normal-corrected, or fully
re-profiled per coordinate.  A quadrature oracle subpackage provides the
brute-force references the test suite compares against.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .data import Dataset, read_csv
from .errors import (
    ConvergenceError,
    DataError,
    FormulaError,
    LapgmError,
    NotPositiveDefiniteError,
    NumericalError,
)
from .fit import FitResult, fit
from .formula import parse_formula
from .model import AssembledModel, build_model
from .sparse import (
    CholeskyFactor,
    SparsePrecision,
    analyze,
    build_sparse,
    cholesky,
    log_det,
    marginal_variances,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "LapgmError",
    "FormulaError",
    "DataError",
    "NumericalError",
    "NotPositiveDefiniteError",
    "ConvergenceError",
    "SparsePrecision",
    "CholeskyFactor",
    "build_sparse",
    "analyze",
    "cholesky",
    "solve",
    "log_det",
    "marginal_variances",
    "Dataset",
    "read_csv",
    "parse_formula",
    "build_model",
    "AssembledModel",
    "fit",
    "FitResult",
    "__version__",
]
