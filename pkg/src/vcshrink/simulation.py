"""Monte Carlo study of the selection/estimation pipeline.

Synthetic data follow a varying-coefficient model with three truly varying
coefficients, six nonzero constants and the rest zero. Covariates (beyond an
all-ones first column) are standard normal with AR(1) cross-correlation, the
index variable is uniform on [0, 1].

Replications are independent and deterministic: replication r draws its
generator from the master seed with a counter-based split, every replication
runs under a single BLAS thread, and aggregation is an ordered reduction, so
reports are byte-identical for any worker count.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .dataio import Dataset
from .penalties import CoefState, GroupKind
from .solver import (DesignOps, SolverConfig, compute_adaptive_weights,
                     fit_constrained_ls)
from .splines import build_design, eval_coef_function, make_knots
from .tuning import (default_lambda0_grid, default_lambda_grids, gcv_select_K,
                     lambda0_path, lambda_pair_path, select_lambda0,
                     select_lambda_pair)

BASIS_ORDER = 4
BASIS_K = 10
ORACLE_K_CANDIDATES = tuple(range(4, 13))
ERROR_COEF_INDICES = (1, 2, 3, 4, 6, 8, 10)

METHOD_GLASSO_BIC = "glasso-bic"
METHOD_GLASSO_EBIC = "glasso-ebic"
METHOD_AGLASSO_BIC_BIC = "aglasso-bic-bic"
METHOD_AGLASSO_BIC_EBIC = "aglasso-bic-ebic"
METHOD_ORACLE = "oracle"
ALL_METHODS = (METHOD_GLASSO_BIC, METHOD_GLASSO_EBIC, METHOD_AGLASSO_BIC_BIC,
               METHOD_AGLASSO_BIC_EBIC, METHOD_ORACLE)

WORKERS_ENV = "VCSHRINK_WORKERS"


@dataclass(frozen=True)
class TruthSpec:
    """The data-generating coefficient functions.

    Groups 1-3 vary with the index, 4-9 are nonzero constants, everything
    else is zero (indices are 1-based).
    """

    p: int

    constants = {4: 1.5, 5: 1.5, 6: 0.5, 7: 0.5, 8: 0.1, 9: 0.1}
    n_varying = 3
    n_constant = 6

    def __post_init__(self):
        if self.p < 9:
            raise ValueError("truth needs at least 9 coefficient groups")

    @property
    def n_nonzero(self) -> int:
        return self.n_varying + self.n_constant

    def coefficient(self, j: int, t):
        """True coefficient value for 1-based group j at index value(s) t."""
        if not 1 <= j <= self.p:
            raise ValueError(f"group index {j} outside 1..{self.p}")
        t = np.asarray(t, dtype=float)
        if j == 1:
            out = 3.0 * np.sin(2.0 * np.pi * t)
        elif j == 2:
            out = 8.0 * t * (1.0 - t)
        elif j == 3:
            out = np.cos(2.0 * np.pi * t ** 2)
        else:
            out = np.full_like(t, self.constants.get(j, 0.0))
        return out if out.ndim else float(out)

    def coefficient_matrix(self, t: np.ndarray) -> np.ndarray:
        """All p true coefficients evaluated at each t: shape (len(t), p)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros((t.size, self.p))
        for j in range(1, min(self.p, 9) + 1):
            out[:, j - 1] = self.coefficient(j, t)
        return out

    def structure(self) -> np.ndarray:
        kinds = np.full(self.p, GroupKind.ZERO, dtype=np.int8)
        kinds[:3] = GroupKind.VARYING
        kinds[3:9] = GroupKind.CONSTANT
        return kinds


def true_coefficient(j: int, t, p: int = 9):
    """Module-level accessor for the simulation truth."""
    return TruthSpec(p=p).coefficient(j, t)


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    p: int = 50
    rho: float = 0.5
    noise_var: float = 0.01       # noise variance (the paper's errors have sd 0.1)
    reps: int = 100
    seed: int = 0
    methods: tuple = ALL_METHODS
    error_grid_size: int = 201

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.p < 9:
            raise ValueError("p must be at least 9 (truth has 9 nonzero groups)")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must be in (-1, 1)")
        if self.error_grid_size < 2:
            raise ValueError("error_grid_size must be at least 2")
        bad = [m for m in self.methods if m not in ALL_METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; valid: {ALL_METHODS}")


@dataclass(frozen=True)
class SelectionCounts:
    correct_zeros: float
    incorrect_zeros: float
    correct_constants: float
    incorrect_constants: float

    def as_tuple(self):
        return (self.correct_zeros, self.incorrect_zeros,
                self.correct_constants, self.incorrect_constants)


@dataclass(frozen=True)
class MethodSummary:
    counts: SelectionCounts            # means over replications
    l2_errors: dict                    # "beta1" -> mean L2 error
    exact_structure_rate: float
    n_nonconverged: int


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    reps: int
    methods: dict                      # method name -> MethodSummary

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "n": cfg.n, "p": cfg.p, "rho": cfg.rho,
                "noise_var": cfg.noise_var, "reps": cfg.reps, "seed": cfg.seed,
                "methods": list(cfg.methods),
                "error_grid_size": cfg.error_grid_size,
            },
            "reps": self.reps,
            "methods": {
                name: {
                    "correct_zeros": s.counts.correct_zeros,
                    "incorrect_zeros": s.counts.incorrect_zeros,
                    "correct_constants": s.counts.correct_constants,
                    "incorrect_constants": s.counts.incorrect_constants,
                    "l2_errors": dict(s.l2_errors),
                    "exact_structure_rate": s.exact_structure_rate,
                    "n_nonconverged": s.n_nonconverged,
                }
                for name, s in self.methods.items()
            },
        }

    def selection_table(self) -> str:
        """Selection counts in the layout of the paper's first table."""
        lines = [f"Model selection (n={self.config.n}, p={self.config.p}, "
                 f"reps={self.reps})",
                 f"{'method':22s} {'zero corr':>10s} {'zero incorr':>12s} "
                 f"{'const corr':>11s} {'const incorr':>13s}"]
        for name, s in self.methods.items():
            c = s.counts
            lines.append(f"{name:22s} {c.correct_zeros:10.2f} "
                         f"{c.incorrect_zeros:12.2f} {c.correct_constants:11.2f} "
                         f"{c.incorrect_constants:13.2f}")
        return "\n".join(lines)

    def error_table(self) -> str:
        """Mean L2 estimation errors in the layout of the paper's second table."""
        labels = [f"beta{j}" for j in ERROR_COEF_INDICES if j <= self.config.p]
        header = f"{'method':22s} " + " ".join(f"{lb:>8s}" for lb in labels)
        lines = [f"Estimation errors (n={self.config.n}, p={self.config.p}, "
                 f"reps={self.reps})", header]
        for name, s in self.methods.items():
            cells = " ".join(f"{s.l2_errors[lb]:8.4f}" for lb in labels)
            lines.append(f"{name:22s} {cells}")
        return "\n".join(lines)


def gen_dataset(config: SimConfig, rep_seed: int):
    """Generate one replication's dataset; bit-identical for a given
    (config.seed, rep_seed) pair.

    The first covariate column is the constant 1; columns 2..p are standard
    normal with Cov(X_j1, X_j2) = rho^|j1-j2|, realized exactly by the AR(1)
    recursion x_j = rho x_{j-1} + sqrt(1-rho^2) z_j.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed,
                                                       spawn_key=(int(rep_seed),)))
    n, p, rho = config.n, config.p, config.rho
    t = rng.uniform(size=n)
    z = rng.standard_normal((n, p - 1))
    eps = rng.standard_normal(n) * math.sqrt(config.noise_var)
    x = np.empty((n, p))
    x[:, 0] = 1.0
    if p > 1:
        x[:, 1] = z[:, 0]
        fade = math.sqrt(1.0 - rho * rho)
        for j in range(2, p):
            x[:, j] = rho * x[:, j - 1] + fade * z[:, j - 1]
    truth = TruthSpec(p=p)
    y = np.sum(x * truth.coefficient_matrix(t), axis=1) + eps
    ds = Dataset(y=y, t=t, x=x)
    return ds, truth


def selection_metrics(fitted: CoefState, truth: TruthSpec) -> SelectionCounts:
    """Counts of correctly/incorrectly identified zero and constant groups."""
    if fitted.p != truth.p:
        raise ValueError("coefficient state does not match the truth dimension")
    true_kinds = truth.structure()
    kinds = fitted.kinds
    is_zero = kinds == GroupKind.ZERO
    # a Constant group with value 0 counts as zeroed
    for j in range(fitted.p):
        if kinds[j] == GroupKind.CONSTANT and fitted.groups[j, 0] == 0.0:
            is_zero[j] = True
    nz_const = (kinds == GroupKind.CONSTANT) & ~is_zero
    truly_zero = true_kinds == GroupKind.ZERO
    truly_const = true_kinds == GroupKind.CONSTANT
    truly_vary = true_kinds == GroupKind.VARYING
    return SelectionCounts(
        correct_zeros=int(np.sum(is_zero & truly_zero)),
        incorrect_zeros=int(np.sum(is_zero & ~truly_zero)),
        correct_constants=int(np.sum(nz_const & truly_const)),
        incorrect_constants=int(np.sum(nz_const & truly_vary)),
    )


def l2_error(fitted_values: np.ndarray, true_values: np.ndarray,
             grid: np.ndarray | None = None) -> float:
    """L2 distance sqrt(integral (fhat - f)^2 dt) by trapezoidal quadrature."""
    fitted_values = np.asarray(fitted_values, dtype=float)
    true_values = np.asarray(true_values, dtype=float)
    if fitted_values.shape != true_values.shape:
        raise ValueError("grids do not match")
    if grid is None:
        grid = np.linspace(0.0, 1.0, fitted_values.size)
    return float(np.sqrt(np.trapezoid((fitted_values - true_values) ** 2, grid)))


@dataclass(frozen=True)
class ReplicationResult:
    counts: SelectionCounts
    l2_errors: dict
    exact_structure: bool
    converged: bool


def _coef_errors(coef: CoefState, spec, truth: TruthSpec, grid: np.ndarray) -> dict:
    errors = {}
    for j in ERROR_COEF_INDICES:
        if j > truth.p:
            continue
        true_vals = truth.coefficient(j, grid)
        if coef.kinds[j - 1] == GroupKind.ZERO:
            fitted = np.zeros_like(grid)
        else:
            fitted = eval_coef_function(coef.groups[j - 1], spec, grid)
        errors[f"beta{j}"] = l2_error(fitted, true_vals, grid)
    return errors


def _run_methods(config: SimConfig, rep: int, methods) -> dict:
    """Execute all requested pipeline variants on replication `rep`.

    The pilot group-lasso path and the (lambda1, lambda2) path are shared
    between the methods that use them, which leaves the per-method results
    identical to standalone runs.
    """
    ds, truth = gen_dataset(config, rep)
    grid = np.linspace(0.0, 1.0, config.error_grid_size)
    spec = make_knots(BASIS_K - BASIS_ORDER, BASIS_ORDER)
    design = build_design(ds.x, ds.t, spec)
    ops = DesignOps(ds.y, design)
    cfg = SolverConfig()
    out = {}

    lasso_methods = [m for m in methods if m != METHOD_ORACLE]
    path0 = None
    if lasso_methods:
        grid0 = default_lambda0_grid(ds.y, design, ops=ops)
        path0 = lambda0_path(ds.y, design, grid0, cfg, ops=ops)

    def finish(method, fit, fit_spec):
        counts = selection_metrics(fit.coef, truth)
        errors = _coef_errors(fit.coef, fit_spec, truth, grid)
        exact = bool(np.all(fit.coef.kinds == truth.structure()))
        out[method] = ReplicationResult(counts=counts, l2_errors=errors,
                                        exact_structure=exact,
                                        converged=fit.converged)

    for mode, method in (("bic", METHOD_GLASSO_BIC), ("ebic", METHOD_GLASSO_EBIC)):
        if method in methods or (mode == "bic" and any(
                m.startswith("aglasso") for m in methods)):
            fit, _ = select_lambda0(ds.y, design, grid0, mode, cfg,
                                    ops=ops, path=path0)
            if method in methods:
                finish(method, fit, spec)
            if mode == "bic":
                pilot = fit

    aglasso = [m for m in methods if m.startswith("aglasso")]
    if aglasso:
        weights = compute_adaptive_weights(pilot)
        grid1, grid2 = default_lambda_grids(ds.y, design, weights, ops=ops)
        pair_path = lambda_pair_path(ds.y, design, weights, grid1, grid2, cfg,
                                     ops=ops)
        for method, mode in ((METHOD_AGLASSO_BIC_BIC, "bic"),
                             (METHOD_AGLASSO_BIC_EBIC, "ebic")):
            if method in methods:
                fit, _ = select_lambda_pair(ds.y, design, weights, grid1, grid2,
                                            mode, cfg, ops=ops, path=pair_path)
                finish(method, fit, spec)

    if METHOD_ORACLE in methods:
        ospec, ofit = gcv_select_K(ds.y, ds.x, ds.t, truth.structure(),
                                   ORACLE_K_CANDIDATES, order=BASIS_ORDER)
        finish(METHOD_ORACLE, ofit, ospec)
    return out


def run_replication(config: SimConfig, method: str, rep_index: int) -> ReplicationResult:
    """One replication of one pipeline variant."""
    if method not in config.methods:
        raise ValueError(f"method {method!r} not in config.methods")
    with threadpool_limits(limits=1):
        return _run_methods(config, rep_index, [method])[method]


def _replication_worker(config: SimConfig, rep: int) -> dict:
    # single-threaded BLAS keeps results identical across worker counts
    with threadpool_limits(limits=1):
        return _run_methods(config, rep, config.methods)


def resolve_workers(n_workers: int | None = None) -> int:
    if n_workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            n_workers = int(env)
        else:
            n_workers = min(4, os.cpu_count() or 1)
    if n_workers < 1:
        raise ValueError("worker count must be positive")
    return n_workers


def run_monte_carlo(config: SimConfig, n_workers: int | None = None) -> SimReport:
    """Run all replications and aggregate; deterministic for a given config."""
    n_workers = resolve_workers(n_workers)
    if n_workers == 1:
        results = [_replication_worker(config, r) for r in range(config.reps)]
    else:
        results = Parallel(n_jobs=n_workers)(
            delayed(_replication_worker)(config, r) for r in range(config.reps))
    summaries = {}
    for method in config.methods:
        reps = [res[method] for res in results]
        counts = np.array([r.counts.as_tuple() for r in reps], dtype=float)
        mean_counts = counts.mean(axis=0)
        labels = reps[0].l2_errors.keys()
        l2 = {lb: float(np.mean([r.l2_errors[lb] for r in reps])) for lb in labels}
        summaries[method] = MethodSummary(
            counts=SelectionCounts(*[float(v) for v in mean_counts]),
            l2_errors=l2,
            exact_structure_rate=float(np.mean([r.exact_structure for r in reps])),
            n_nonconverged=int(np.sum([not r.converged for r in reps])),
        )
    return SimReport(config=config, reps=config.reps, methods=summaries)
