"""Information-criterion tuning for the penalty parameters.

The criterion is

    log(rss / n) + d1 (log n / n) C_n + d2 (log(n/K) / (n/K)) C_n

with d1 the number of groups estimated as nonzero constants and d2 the
number estimated as truly varying. C_n = 1 gives the ordinary BIC;
C_n = sqrt(log(p K)) the extended BIC, which penalizes model size harder
when p is large.

Grid searches walk each penalty path from small to large, warm-starting
every fit from its predecessor, then refit cold at the selected point so the
returned fit does not depend on the path order.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .penalties import GroupKind, PenaltyWeights
from .solver import (DesignOps, FitResult, SolverConfig, fit_constrained_ls,
                     fit_double_penalty, fit_group_lasso)
from .splines import BasisSpec, GroupedDesign, build_design, make_knots

log = logging.getLogger(__name__)

_RSS_FLOOR = 1e-300          # keeps log(rss/n) finite on interpolating fits
GRID_SIZE = 15
GRID_SPAN = 1e-3             # smallest grid point relative to lambda_max
# pilot grid: reaches the near-interpolation regime at the bottom and stays
# below the all-kill threshold at the top, so the criterion always chooses
# among nontrivial pilot models
PILOT_GRID_SPAN = 1e-4
PILOT_GRID_TOP = 0.5


@dataclass(frozen=True)
class TuningReport:
    grid: tuple                     # lambda values, or (lambda1, lambda2) pairs
    criterion_values: np.ndarray
    chosen: int
    criterion_mode: str
    cn: float
    converged: np.ndarray           # per grid point; False points were skipped

    def __post_init__(self):
        if not 0 <= self.chosen < len(self.grid):
            raise ValueError("chosen index out of range")


def cn_value(mode: str, p: int, K: int) -> float:
    """Criterion inflation factor: 1 for BIC, sqrt(log(pK)) for EBIC."""
    if p < 1 or K < 1:
        raise ValueError("p and K must be positive")
    mode = mode.lower()
    if mode == "bic":
        return 1.0
    if mode == "ebic":
        if p * K <= 1:
            raise ValueError("EBIC needs p*K > 1 (log would be nonpositive)")
        return math.sqrt(math.log(p * K))
    raise ValueError(f"unknown criterion mode {mode!r}")


def compute_bic(fit: FitResult, n: int, K: int, cn: float) -> float:
    """Criterion value for a fit, with d1 = nonzero constants, d2 = varying."""
    if n <= K:
        raise ValueError("criterion requires n > K")
    if fit.rss < 0:
        raise ValueError("negative rss")
    kinds = fit.coef.kinds
    d1 = int(np.sum([kinds[j] == GroupKind.CONSTANT and fit.coef.groups[j, 0] != 0.0
                     for j in range(fit.coef.p)]))
    d2 = int(np.sum(kinds == GroupKind.VARYING))
    ratio = max(fit.rss / n, _RSS_FLOOR)
    return (math.log(ratio)
            + d1 * (math.log(n) / n) * cn
            + d2 * (math.log(n / K) / (n / K)) * cn)


def _log_grid(lam_max: float, size: int, span: float = GRID_SPAN) -> np.ndarray:
    """Ascending log-spaced grid from lam_max * span up to lam_max."""
    if lam_max <= 0.0:
        return np.array([0.0])
    return np.geomspace(lam_max * span, lam_max, size)


def default_lambda0_grid(y, design, size: int = GRID_SIZE, *,
                         ops: DesignOps | None = None) -> np.ndarray:
    if ops is None:
        ops = DesignOps(y, design)
    skip = np.zeros(design.p, dtype=bool)
    lam_max = ops.lambda1_max(np.ones(design.p), skip)
    return _log_grid(lam_max * PILOT_GRID_TOP, size, PILOT_GRID_SPAN)


def default_lambda_grids(y, design, w: PenaltyWeights, size: int = GRID_SIZE, *,
                         ops: DesignOps | None = None):
    """(lambda1, lambda2) grids bracketing the full selection path."""
    if ops is None:
        ops = DesignOps(y, design)
    g1 = _log_grid(ops.lambda1_max(w.w1, w.forced_zero), size)
    g2 = _log_grid(ops.lambda2_max(w.w2, w.forced_zero | w.forced_constant), size)
    return g1, g2


def _argmin_prefer_larger(criteria: np.ndarray, keys: list, usable: np.ndarray) -> int:
    """Index of the smallest criterion; ties go to the larger penalty."""
    if not np.any(usable):
        log.warning("no converged fit on the grid; selecting among all points")
        usable = np.ones_like(usable)
    best = None
    for i in range(len(keys)):
        if not usable[i]:
            continue
        cand = (criteria[i], tuple(-k for k in np.atleast_1d(keys[i])))
        if best is None or cand < best[0]:
            best = (cand, i)
    return best[1]


def lambda0_path(y, design: GroupedDesign, grid0, cfg: SolverConfig, *,
                 ops: DesignOps | None = None) -> list[FitResult]:
    """Group-lasso fits along an ascending lambda0 grid, warm-started."""
    if ops is None:
        ops = DesignOps(y, design)
    grid0 = np.sort(np.asarray(grid0, dtype=float))
    if grid0.size == 0:
        raise ValueError("empty grid")
    fits = []
    warm = None
    for lam in grid0:
        fit = fit_group_lasso(y, design, lam, cfg, warm=warm, ops=ops)
        fits.append(fit)
        warm = fit.coef
    return fits


def select_lambda0(y, design: GroupedDesign, grid0, mode: str, cfg: SolverConfig, *,
                   ops: DesignOps | None = None,
                   path: list[FitResult] | None = None):
    """Pick lambda0 for the pilot group-lasso fit by BIC or EBIC.

    Returns the criterion-minimizing fit (refit cold at the chosen value)
    and the tuning report. A precomputed `path` (from `lambda0_path` on the
    same sorted grid) lets several criteria share one set of fits.
    """
    if ops is None:
        ops = DesignOps(y, design)
    grid0 = np.sort(np.asarray(grid0, dtype=float))
    if path is None:
        path = lambda0_path(y, design, grid0, cfg, ops=ops)
    if len(path) != grid0.size:
        raise ValueError("path length does not match the grid")
    cn = cn_value(mode, design.p, design.K)
    crit = np.array([compute_bic(f, design.n, design.K, cn) for f in path])
    usable = np.array([f.converged for f in path])
    chosen = _argmin_prefer_larger(crit, list(grid0), usable)
    best = fit_group_lasso(y, design, float(grid0[chosen]), cfg, ops=ops)
    report = TuningReport(grid=tuple(float(g) for g in grid0),
                          criterion_values=crit, chosen=chosen,
                          criterion_mode=mode.lower(), cn=cn, converged=usable)
    return best, report


def lambda_pair_path(y, design: GroupedDesign, w: PenaltyWeights, grid1, grid2,
                     cfg: SolverConfig, *,
                     ops: DesignOps | None = None) -> list[FitResult]:
    """Double-penalty fits over the (lambda1, lambda2) grid.

    Fits are produced in row-major order over ascending (lambda2, lambda1);
    each path in lambda1 is warm-started sequentially, and each path head
    starts from the previous path's head.
    """
    if ops is None:
        ops = DesignOps(y, design)
    grid1 = np.sort(np.asarray(grid1, dtype=float))
    grid2 = np.sort(np.asarray(grid2, dtype=float))
    if grid1.size == 0 or grid2.size == 0:
        raise ValueError("empty grid")
    fits = []
    head_warm = None
    for lam2 in grid2:
        warm = head_warm
        row = []
        for lam1 in grid1:
            fit = fit_double_penalty(y, design, float(lam1), float(lam2), w, cfg,
                                     warm=warm, ops=ops)
            row.append(fit)
            warm = fit.coef
        head_warm = row[0].coef
        fits.extend(row)
    return fits


def select_lambda_pair(y, design: GroupedDesign, w: PenaltyWeights, grid1, grid2,
                       mode: str, cfg: SolverConfig, *,
                       ops: DesignOps | None = None,
                       path: list[FitResult] | None = None):
    """Joint (lambda1, lambda2) selection by BIC or EBIC.

    Returns the criterion-minimizing fit, refit cold at the chosen pair, and
    the tuning report over the full grid.
    """
    if ops is None:
        ops = DesignOps(y, design)
    grid1 = np.sort(np.asarray(grid1, dtype=float))
    grid2 = np.sort(np.asarray(grid2, dtype=float))
    if path is None:
        path = lambda_pair_path(y, design, w, grid1, grid2, cfg, ops=ops)
    pairs = [(float(l1), float(l2)) for l2 in grid2 for l1 in grid1]
    if len(path) != len(pairs):
        raise ValueError("path length does not match the grid")
    cn = cn_value(mode, design.p, design.K)
    crit = np.array([compute_bic(f, design.n, design.K, cn) for f in path])
    usable = np.array([f.converged for f in path])
    chosen = _argmin_prefer_larger(crit, pairs, usable)
    l1, l2 = pairs[chosen]
    best = fit_double_penalty(y, design, l1, l2, w, cfg, ops=ops)
    report = TuningReport(grid=tuple(pairs), criterion_values=crit, chosen=chosen,
                          criterion_mode=mode.lower(), cn=cn, converged=usable)
    return best, report


def gcv_select_K(y, x, t, structure, k_candidates, order: int = 4):
    """Pick the basis dimension for the known-structure least-squares fit.

    GCV(K) = (rss/n) / (1 - df/n)^2 with df = K * n_varying + n_constant.
    Candidates with df >= n are excluded. Returns the winning basis spec and
    its fit.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    n = y.size
    structure = np.asarray(structure, dtype=np.int8)
    n_vary = int(np.sum(structure == GroupKind.VARYING))
    n_const = int(np.sum(structure == GroupKind.CONSTANT))
    best = None
    for K in k_candidates:
        if K < order:
            raise ValueError(f"candidate K={K} below the spline order {order}")
        df = K * n_vary + n_const
        if df >= n:
            continue
        spec = make_knots(K - order, order)
        design = build_design(x, t, spec)
        fit = fit_constrained_ls(y, design, structure, spec)
        gcv = (fit.rss / n) / (1.0 - df / n) ** 2
        if best is None or gcv < best[0]:
            best = (gcv, spec, fit)
    if best is None:
        raise ValueError("no usable K candidate (df >= n for all)")
    return best[1], best[2]
