"""Select the sparse-factorization kernel backend at import time.

The compiled extension is preferred; the pure-Python module is a drop-in
replacement used when the extension was not built (or when the environment
variable ``LAPGM_PURE_PYTHON`` is set to a non-empty value, which the test
suite and the benchmark script use to exercise both paths).
"""

import os

if os.environ.get("LAPGM_PURE_PYTHON"):
    from . import _chol_py as impl

    BACKEND = "python"
else:
    try:
        from . import _chol_c as impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _chol_py as impl

        BACKEND = "python"

etree = impl.etree
symbolic = impl.symbolic
numeric = impl.numeric
lsolve = impl.lsolve
ltsolve = impl.ltsolve
inv_diag = impl.inv_diag
