"""Command-line interface: `vcshrink fit` and `vcshrink simulate`.

Exit codes: 0 success, 2 parse/validation error, 3 solver non-convergence.
The worker count for `simulate` honors the VCSHRINK_WORKERS environment
variable; results do not depend on it.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from .dataio import DataError, FitExport, input_digest, read_dataset
from .penalties import GroupKind, PenaltyWeights
from .simulation import ALL_METHODS, SimConfig, run_monte_carlo
from .solver import (DesignOps, SolverConfig, compute_adaptive_weights,
                     fit_double_penalty, fit_group_lasso)
from .splines import build_design, eval_coef_function, make_knots
from .tuning import (cn_value, compute_bic, default_lambda0_grid,
                     default_lambda_grids, select_lambda0, select_lambda_pair)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

SAMPLE_GRID_SIZE = 201


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcshrink",
        description="Varying-coefficient regression with double adaptive "
                    "group-lasso shrinkage")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model to a dataset file")
    fit.add_argument("data", help='delimited text file with header "t,y,x1,...,xp"')
    fit.add_argument("--K", type=int, default=10, help="basis dimension (default 10)")
    fit.add_argument("--order", type=int, default=4, help="spline order (default 4)")
    fit.add_argument("--criterion", choices=["bic", "ebic"], default="ebic",
                     help="criterion for the (lambda1, lambda2) search")
    fit.add_argument("--grid-size", type=int, default=15,
                     help="points per penalty grid (default 15)")
    fit.add_argument("--rescale-t", action="store_true",
                     help="map index values affinely onto [0, 1]")
    fit.add_argument("--lambda0", type=float, default=None,
                     help="fix the pilot group-lasso penalty")
    fit.add_argument("--lambda1", type=float, default=None,
                     help="fix lambda1 instead of searching")
    fit.add_argument("--lambda2", type=float, default=None,
                     help="fix lambda2 instead of searching")
    fit.add_argument("--no-tune", action="store_true",
                     help="skip criterion search; fit at the given lambdas")
    fit.add_argument("--out", default=None,
                     help="export path (default: <data>.fit.json)")

    sim = sub.add_parser("simulate", help="run the Monte Carlo study")
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--p", type=int, default=50)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--methods", default=",".join(ALL_METHODS),
                     help="comma-separated pipeline variants")
    sim.add_argument("--noise-var", type=float, default=0.01,
                     help="noise variance (default 0.01, i.e. sd 0.1)")
    sim.add_argument("--out", default=None, help="write the JSON report here")
    return parser


def _classification_labels(coef) -> list:
    names = {GroupKind.ZERO: "zero", GroupKind.CONSTANT: "constant",
             GroupKind.VARYING: "varying"}
    return [names[GroupKind(k)] for k in coef.kinds]


def _cmd_fit(args) -> int:
    try:
        ds = read_dataset(args.data, rescale_t=args.rescale_t)
        if args.K < args.order:
            raise DataError(f"K={args.K} must be at least the order {args.order}")
        spec = make_knots(args.K - args.order, args.order)
        design = build_design(ds.x, ds.t, spec)
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    ops = DesignOps(ds.y, design)
    cfg = SolverConfig()
    lam0 = args.lambda0
    if args.no_tune:
        lam1 = args.lambda1 if args.lambda1 is not None else 0.0
        lam2 = args.lambda2 if args.lambda2 is not None else 0.0
        if lam0 is not None:
            pilot = fit_group_lasso(ds.y, design, lam0, cfg, ops=ops)
            weights = compute_adaptive_weights(pilot)
        else:
            weights = PenaltyWeights.unit(design.p)
        fit = fit_double_penalty(ds.y, design, lam1, lam2, weights, cfg, ops=ops)
        cn = cn_value(args.criterion, design.p, design.K)
        crit = {"mode": args.criterion, "cn": cn,
                "value": compute_bic(fit, design.n, design.K, cn)}
    else:
        grid0 = ([lam0] if lam0 is not None
                 else default_lambda0_grid(ds.y, design, args.grid_size, ops=ops))
        pilot, rep0 = select_lambda0(ds.y, design, grid0, "bic", cfg, ops=ops)
        lam0 = rep0.grid[rep0.chosen]
        weights = compute_adaptive_weights(pilot)
        grid1, grid2 = default_lambda_grids(ds.y, design, weights,
                                            args.grid_size, ops=ops)
        if args.lambda1 is not None:
            grid1 = [args.lambda1]
        if args.lambda2 is not None:
            grid2 = [args.lambda2]
        fit, rep = select_lambda_pair(ds.y, design, weights, grid1, grid2,
                                      args.criterion, cfg, ops=ops)
        crit = {"mode": rep.criterion_mode, "cn": rep.cn,
                "value": float(rep.criterion_values[rep.chosen])}

    grid = np.linspace(0.0, 1.0, SAMPLE_GRID_SIZE)
    names = ds.column_names or tuple(f"x{j+1}" for j in range(ds.p))
    constants, samples = {}, {}
    for j, name in enumerate(names):
        kind = GroupKind(fit.coef.kinds[j])
        if kind == GroupKind.CONSTANT:
            constants[name] = fit.coef.constant_value(j)
        elif kind == GroupKind.VARYING:
            samples[name] = eval_coef_function(fit.coef.groups[j], spec, grid).tolist()
    export = FitExport(
        classification=tuple(_classification_labels(fit.coef)),
        constant_values=constants,
        function_samples=samples,
        sample_grid=tuple(grid.tolist()),
        lambda0=lam0, lambda1=fit.lambda1, lambda2=fit.lambda2,
        criterion=crit, rss=fit.rss, K=design.K, order=spec.order,
        diagnostics={"n_iter": fit.n_iter, "converged": fit.converged,
                     "kkt_residual": fit.kkt},
        version=__version__,
        input_digest=input_digest(args.data),
    )
    out = args.out or (args.data + ".fit.json")
    export.write(out)
    zero = sum(k == "zero" for k in export.classification)
    const = len(constants)
    vary = len(samples)
    print(f"fit: {vary} varying, {const} constant, {zero} zero "
          f"(lambda0={export.lambda0:.5g}, lambda1={export.lambda1:.5g}, "
          f"lambda2={export.lambda2:.5g}) -> {out}")
    if not fit.converged:
        print("warning: solver did not certify convergence", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_simulate(args) -> int:
    methods = tuple(m.strip().lower() for m in args.methods.split(",") if m.strip())
    try:
        config = SimConfig(n=args.n, p=args.p, reps=args.reps, seed=args.seed,
                           methods=methods, noise_var=args.noise_var)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = run_monte_carlo(config)
    print(report.selection_table())
    print()
    print(report.error_table())
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        print(f"\nreport written to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "fit":
        return _cmd_fit(args)
    return _cmd_simulate(args)


if __name__ == "__main__":
    sys.exit(main())
