"""Varying-coefficient regression with double adaptive group-lasso shrinkage.

Fits Y = sum_j X_j beta_j(t) + eps with B-spline coefficient expansions,
selecting irrelevant covariates and identifying constant coefficients in one
convex criterion, tuned by BIC/EBIC.
"""

__version__ = "0.1.0"

from .dataio import DataError, Dataset, FitExport, read_dataset, write_dataset
from .penalties import (CoefState, GroupKind, PenaltyWeights, centered_norm,
                        group_norm, kkt_residual, objective)
from .simulation import (SimConfig, SimReport, TruthSpec, gen_dataset, l2_error,
                         run_monte_carlo, run_replication, selection_metrics,
                         true_coefficient)
from .solver import (DesignOps, FitResult, SolverConfig, compute_adaptive_weights,
                     fit_constrained_ls, fit_double_penalty, fit_group_lasso,
                     lqa_step)
from .splines import (BasisSpec, GroupedDesign, basis_matrix, build_design,
                      eval_basis, eval_coef_function, make_knots)
from .tuning import (TuningReport, cn_value, compute_bic, default_lambda0_grid,
                     default_lambda_grids, gcv_select_K, select_lambda0,
                     select_lambda_pair)

__all__ = [
    "BasisSpec", "CoefState", "DataError", "Dataset", "DesignOps", "FitExport",
    "FitResult", "GroupKind", "GroupedDesign", "PenaltyWeights", "SimConfig",
    "SimReport", "SolverConfig", "TruthSpec", "TuningReport", "basis_matrix",
    "build_design", "centered_norm", "cn_value", "compute_adaptive_weights",
    "compute_bic", "default_lambda0_grid", "default_lambda_grids", "eval_basis",
    "eval_coef_function", "fit_constrained_ls", "fit_double_penalty",
    "fit_group_lasso", "gcv_select_K", "gen_dataset", "group_norm",
    "kkt_residual", "l2_error", "lqa_step", "make_knots", "objective",
    "read_dataset", "run_monte_carlo", "run_replication", "select_lambda0",
    "select_lambda_pair", "selection_metrics", "true_coefficient",
    "write_dataset",
]
