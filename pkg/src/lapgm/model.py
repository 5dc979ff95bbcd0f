"""Binding a parsed formula to data and assembling the joint precision.

The latent vector is laid out as x = (eta, mu, beta_1..beta_p, f_1, ..., f_K):
the linear predictor block first, then the intercept, fixed effects, and one
block per random-effect component.  The predictor is tied to its additive
decomposition by a high-precision noise term tau_eps, which makes the joint
precision

    Q_joint = [[tau_eps*I, -tau_eps*B], [-tau_eps*B', D(theta) + tau_eps*B'B]]

with B the 0/1-and-covariate map from (mu, beta, f) to eta and D(theta) the
block-diagonal prior precision.  All B-products are computed once; moving to
a new theta only rewrites values, never the sparsity pattern, so Cholesky
symbolic analysis can be reused across the whole exploration.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import components as _comp
from .errors import DataError, FormulaError
from .formula import ComponentSpec, HyperOption, ModelSpec, parse_formula
from .likelihoods import BinomialFamily, GaussianFamily, PoissonFamily
from .priors import PriorSpec
from .sparse import SparsePrecision, analyze

DEFAULT_TAU_EPS = 1.0e5
DEFAULT_FIXED_EFFECT_PREC = 1.0e-3
DEFAULT_PREC_PRIOR = PriorSpec("gamma", (1.0, 5.0e-5))
DEFAULT_RHO_PRIOR = PriorSpec("gaussian", (0.0, 0.15))
DEFAULT_LOG_PREC_INITIAL = 4.0
# Intrinsic structure matrices are rank deficient; a small diagonal lift keeps
# the joint precision factorizable while the real identification comes from
# the sum-to-zero constraint.
INTRINSIC_DIAGONAL_LIFT = 1.0e-5


@dataclass
class Block:
    """One contiguous segment of the latent vector."""

    name: str
    kind: str          # "eta" | "intercept" | "linear" | "iid" | "ar1" | "rw2"
    offset: int
    size: int

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.size)


@dataclass
class LatentLayout:
    n: int
    dim: int
    blocks: list
    y: np.ndarray
    obs_mask: np.ndarray            # True where the response is observed
    covariates: dict                # name -> length-n value array
    index_maps: dict                # comp name -> length-n int array, -1 = no contribution
    comp_sizes: dict                # comp name -> m_k
    intercept: bool

    def block(self, name):
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def mapping_matrix(self, name):
        """Dense n x m_k 0/1 incidence matrix A_k (test/demo helper)."""
        idx = self.index_maps[name]
        A = np.zeros((self.n, self.comp_sizes[name]))
        rows = np.flatnonzero(idx >= 0)
        A[rows, idx[rows]] = 1.0
        return A

    def latent_names(self):
        """Flat per-coordinate names, e.g. eta[1], mu, beta.w, u[3]."""
        out = []
        for b in self.blocks:
            if b.kind == "eta":
                out.extend(f"eta[{i + 1}]" for i in range(b.size))
            elif b.kind == "intercept":
                out.append("mu")
            elif b.kind == "linear":
                out.append(f"beta.{b.name}")
            else:
                out.extend(f"{b.name}[{i + 1}]" for i in range(b.size))
        return out


def bind_data(spec, data):
    """Resolve a ModelSpec against a Dataset into a LatentLayout."""
    if spec.response not in data:
        raise DataError(f"data: response column {spec.response!r} not found")
    y = data[spec.response]
    n = len(y)
    if n == 0:
        raise DataError("data: empty table")
    obs_mask = ~np.isnan(y)

    covariates = {}
    for name in spec.covariates:
        col = data[name]
        if np.isnan(col).any():
            row = int(np.flatnonzero(np.isnan(col))[0]) + 2
            raise DataError(f"data: covariate {name!r} has NA at line {row}; "
                            "only the response may be missing")
        covariates[name] = col

    index_maps = {}
    comp_sizes = {}
    for comp in spec.components:
        raw = data[comp.name]
        missing = np.isnan(raw)
        idx = np.where(missing, 1.0, raw)
        as_int = idx.astype(np.int64)
        if not np.array_equal(as_int, idx):
            row = int(np.flatnonzero(as_int != idx)[0]) + 2
            raise DataError(f"data: index column {comp.name!r} must hold "
                            f"integers (line {row})")
        if (as_int < 1).any():
            raise DataError(f"data: index column {comp.name!r} has entries "
                            "below 1; indices are 1-based")
        m = int(as_int.max()) if comp.n is None else int(comp.n)
        if as_int.max() > m:
            raise DataError(f"data: index column {comp.name!r} has index "
                            f"{int(as_int.max())} but n={m} was declared")
        j = as_int - 1
        j[missing] = -1
        index_maps[comp.name] = j
        comp_sizes[comp.name] = m

    blocks = [Block("eta", "eta", 0, n)]
    offset = n
    if spec.intercept:
        blocks.append(Block("mu", "intercept", offset, 1))
        offset += 1
    for name in spec.covariates:
        blocks.append(Block(name, "linear", offset, 1))
        offset += 1
    for comp in spec.components:
        m = comp_sizes[comp.name]
        blocks.append(Block(comp.name, comp.kind, offset, m))
        offset += m
    return LatentLayout(
        n=n, dim=offset, blocks=blocks, y=y, obs_mask=obs_mask,
        covariates=covariates, index_maps=index_maps, comp_sizes=comp_sizes,
        intercept=spec.intercept,
    )


@dataclass
class HyperParam:
    """One hyperparameter on its internal (unbounded) scale."""

    name: str
    comp: str               # component name, or "obs" for the likelihood
    role: str               # "prec" | "rho"
    prior: PriorSpec
    fixed: bool
    initial: float

    def describe(self):
        return f"{self.name} ~ {self.prior!r}" + (" [fixed]" if self.fixed else "")


def _resolve_hyper(name, comp_name, role, option, default_prior, default_initial):
    if isinstance(option, dict):
        option = HyperOption(**option)
    opt = option or HyperOption()
    prior = opt.resolved_prior(default_prior)
    initial = default_initial if opt.initial is None else float(opt.initial)
    return HyperParam(name=name, comp=comp_name, role=role, prior=prior,
                      fixed=opt.fixed, initial=initial)


class AssembledModel:
    """A bound model with a reusable sparse-assembly plan.

    Public surface: ``theta_names``/``theta_init`` describe the free
    hyperparameters; ``assemble(theta)`` returns Q_joint(theta) with a stable
    pattern; ``log_prior_theta``, ``family_at``, ``constraints`` feed the
    inference layer.
    """

    def __init__(self, spec, layout, family=None, tau_eps=DEFAULT_TAU_EPS,
                 fixed_effect_prec=DEFAULT_FIXED_EFFECT_PREC, obs_hyper=None,
                 ntrials=None):
        self.spec = spec
        self.layout = layout
        self.family_name = family or getattr(spec, "family", "gaussian") or "gaussian"
        if self.family_name not in ("gaussian", "poisson", "binomial"):
            raise FormulaError(f"unknown likelihood family {self.family_name!r}")
        self.tau_eps = float(tau_eps)
        if self.tau_eps <= 0:
            raise ValueError("tau_eps must be positive")
        self.fixed_effect_prec = float(fixed_effect_prec)
        if ntrials is None:
            self._ntrials = np.ones(layout.n)
        else:
            self._ntrials = np.broadcast_to(
                np.asarray(ntrials, dtype=np.float64), (layout.n,)).copy()

        self.hypers = []
        for comp in spec.components:
            self.hypers.append(_resolve_hyper(
                f"log_prec:{comp.name}", comp.name, "prec",
                comp.hyper_option("prec"), DEFAULT_PREC_PRIOR,
                DEFAULT_LOG_PREC_INITIAL))
            if comp.kind == "ar1":
                self.hypers.append(_resolve_hyper(
                    f"logit_rho:{comp.name}", comp.name, "rho",
                    comp.hyper_option("rho"), DEFAULT_RHO_PRIOR, 0.0))
        if self.family_name == "gaussian":
            self.hypers.append(_resolve_hyper(
                "log_prec:obs", "obs", "prec", obs_hyper, DEFAULT_PREC_PRIOR,
                DEFAULT_LOG_PREC_INITIAL))

        self._free = [i for i, h in enumerate(self.hypers) if not h.fixed]
        self.theta_names = [self.hypers[i].name for i in self._free]
        self.theta_init = np.array([self.hypers[i].initial for i in self._free])
        self.n_theta = len(self._free)

        self._build_constraints()
        self._build_plan()
        # one shared symbolic analysis: every Q_joint(theta) and every
        # P = Q + diag(c) has the same pattern
        self.chol_context = analyze(self.assemble(self.theta_init))
        self.family_at(self.theta_init).validate(
            self.layout.y[self.layout.obs_mask])

    # -- hyperparameter bookkeeping ------------------------------------

    def full_hyper_vector(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape != (self.n_theta,):
            raise ValueError(
                f"theta has length {theta.size}, expected {self.n_theta}")
        full = np.array([h.initial for h in self.hypers])
        full[self._free] = theta
        return full

    def log_prior_theta(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if theta.shape != (self.n_theta,):
            raise ValueError(
                f"theta has length {theta.size}, expected {self.n_theta}")
        return float(sum(self.hypers[i].prior.log_density(t)
                         for i, t in zip(self._free, theta)))

    def family_at(self, theta):
        """Observation family bound to the hyper values in theta, with any
        per-observation sizes restricted to the observed rows (the inference
        layer evaluates likelihood terms on the observed subset only)."""
        if self.family_name == "gaussian":
            full = self.full_hyper_vector(theta)
            return GaussianFamily(tau=math.exp(full[-1]))
        if self.family_name == "poisson":
            return PoissonFamily()
        return BinomialFamily(ntrials=self._ntrials[self.layout.obs_mask])

    # -- constraints ----------------------------------------------------

    def _build_constraints(self):
        rows = []
        for comp in self.spec.components:
            if comp.constr:
                b = self.layout.block(comp.name)
                row = np.zeros(self.layout.dim)
                row[b.slice] = 1.0
                rows.append(row)
        self.constraints = np.array(rows) if rows else None

    # -- sparse assembly plan --------------------------------------------

    def _component_precision(self, comp, full_hyper):
        tau = phi = None
        for h, v in zip(self.hypers, full_hyper):
            if h.comp == comp.name:
                if h.role == "prec":
                    tau = math.exp(v)
                else:
                    phi = _comp.theta_to_correlation(v)
        if comp.kind == "iid":
            return _comp.iid_precision(self.layout.comp_sizes[comp.name], tau)
        if comp.kind == "ar1":
            return _comp.ar1_precision(self.layout.comp_sizes[comp.name], phi, tau)
        Q = self._rw2_structure(comp)
        return Q.with_values(Q.vals * tau)

    def _rw2_structure(self, comp):
        key = (comp.name, comp.scale_model)
        cached = self._rw2_cache.get(key)
        if cached is None:
            m = self.layout.comp_sizes[comp.name]
            R = _comp.rw2_structure(m, scale_model=comp.scale_model)
            cached = R.add_diag(np.full(m, INTRINSIC_DIAGONAL_LIFT))
            self._rw2_cache[key] = cached
        return cached

    def _build_plan(self):
        self._rw2_cache = {}
        lay = self.layout
        n, dim, te = lay.n, lay.dim, self.tau_eps
        rows, cols, vals = [], [], []

        def put(r, c, v):
            r = np.asarray(r, dtype=np.int64).ravel()
            c = np.asarray(c, dtype=np.int64).ravel()
            v = np.broadcast_to(np.asarray(v, dtype=np.float64), r.shape).ravel()
            lo = np.minimum(r, c)
            hi = np.maximum(r, c)
            rows.append(lo)
            cols.append(hi)
            vals.append(np.asarray(v))

        eta = np.arange(n)
        put(eta, eta, te)

        # columns of B (predictor design): intercept ones, covariates, components
        design = []      # (block, column values or index map)
        for b in lay.blocks[1:]:
            if b.kind == "intercept":
                design.append((b, np.ones(n)))
            elif b.kind == "linear":
                design.append((b, lay.covariates[b.name]))

        # eta cross terms and dense fixed-effect corner
        for b, colv in design:
            put(eta, np.full(n, b.offset), -te * colv)
        for a_i, (ba, va) in enumerate(design):
            for bb, vb in design[a_i:]:
                put(ba.offset, bb.offset, te * float(va @ vb))
        # prior precision on the fixed effects
        for b, _ in design:
            put(b.offset, b.offset, self.fixed_effect_prec)

        comp_blocks = [b for b in lay.blocks if b.kind in ("iid", "ar1", "rw2")]
        for b in comp_blocks:
            idx = lay.index_maps[b.name]
            hit = np.flatnonzero(idx >= 0)
            gcol = b.offset + idx[hit]
            put(hit, gcol, -te)
            counts = np.bincount(idx[hit], minlength=b.size).astype(np.float64)
            put(np.arange(b.size) + b.offset, np.arange(b.size) + b.offset,
                te * counts)
            for bf, colv in design:
                sums = np.bincount(idx[hit], weights=colv[hit], minlength=b.size)
                nz = np.flatnonzero(sums != 0.0)
                if nz.size:
                    put(np.full(nz.size, bf.offset), b.offset + nz, te * sums[nz])

        for a_i, ba in enumerate(comp_blocks):
            ia = lay.index_maps[ba.name]
            for bb in comp_blocks[a_i + 1:]:
                ib = lay.index_maps[bb.name]
                both = np.flatnonzero((ia >= 0) & (ib >= 0))
                if both.size == 0:
                    continue
                key = ia[both].astype(np.int64) * bb.size + ib[both]
                uniq, cnts = np.unique(key, return_counts=True)
                put(ba.offset + uniq // bb.size, bb.offset + uniq % bb.size,
                    te * cnts.astype(np.float64))

        static_r = np.concatenate(rows)
        static_c = np.concatenate(cols)
        static_v = np.concatenate(vals)

        # one value slot per component-precision entry, refreshed at each theta
        dyn_r, dyn_c = [], []
        self._dyn_slices = {}
        pos = 0
        ref = np.array([h.initial for h in self.hypers])
        for comp in self.spec.components:
            Qk = self._component_precision(comp, ref)
            b = lay.block(comp.name)
            dyn_r.append(Qk.rows + b.offset)
            dyn_c.append(Qk.cols + b.offset)
            self._dyn_slices[comp.name] = slice(pos, pos + Qk.nnz)
            pos += Qk.nnz
        all_r = np.concatenate([static_r] + dyn_r) if dyn_r else static_r
        all_c = np.concatenate([static_c] + dyn_c) if dyn_c else static_c

        self._val_buffer = np.concatenate([static_v, np.zeros(pos)])
        self._n_static = static_v.size
        keys = all_c * np.int64(dim) + all_r
        uniq, inverse = np.unique(keys, return_inverse=True)
        self._fold = inverse
        self._nnz = uniq.size
        self._Q_rows = (uniq % dim).astype(np.int64)
        self._Q_cols = (uniq // dim).astype(np.int64)

    def assemble(self, theta):
        """Q_joint(theta) as an upper-triangle SparsePrecision."""
        full = self.full_hyper_vector(theta)
        buf = self._val_buffer.copy()   # fresh per call: assembly is reentrant
        for comp in self.spec.components:
            Qk = self._component_precision(comp, full)
            buf[self._n_static:][self._dyn_slices[comp.name]] = Qk.vals
        acc = np.bincount(self._fold, weights=buf, minlength=self._nnz)
        return SparsePrecision(self.layout.dim, self._Q_rows, self._Q_cols, acc,
                               _canonical=True)

    # -- densities -------------------------------------------------------

    def latent_log_prior(self, theta, x):
        """log pi(x | theta), constraint-corrected when constraints exist."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.layout.dim,):
            raise ValueError(
                f"x has length {x.size}, expected {self.layout.dim}")
        Q = self.assemble(theta)
        factor = self.chol_context.factor(Q)
        quad = float(x @ Q.matvec(x))
        out = -0.5 * quad + 0.5 * factor.log_det() \
            - 0.5 * self.layout.dim * math.log(2.0 * math.pi)
        if self.constraints is not None:
            A = self.constraints
            q = A.shape[0]
            W = np.column_stack([factor.solve(a) for a in A])
            S = A @ W
            sign, logdet_S = np.linalg.slogdet(S)
            if sign <= 0:
                raise np.linalg.LinAlgError("constraint covariance not PD")
            out += 0.5 * q * math.log(2.0 * math.pi) + 0.5 * logdet_S
        return out


def assemble_joint_precision(model, theta):
    return model.assemble(theta)


def latent_log_prior(model, theta, x):
    return model.latent_log_prior(theta, x)


def build_model(formula, data, family=None, **kwargs):
    """Parse (if needed), bind, and assemble in one call."""
    spec = parse_formula(formula) if isinstance(formula, str) else formula
    layout = bind_data(spec, data)
    if family is None:
        family = getattr(spec, "family", None)
    ntrials = kwargs.pop("ntrials", None)
    if family == "binomial" and ntrials is None and "ntrials" in data:
        ntrials = data["ntrials"]
    return AssembledModel(spec, layout, family=family, ntrials=ntrials, **kwargs)
