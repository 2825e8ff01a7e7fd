"""Command line: ``hdgmm {fit,infer,simulate,panel}``.

Exit codes: 0 success, 2 input error, 3 numerical failure. Results go to
``--out`` or standard output; progress messages go to standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import io as hio
from .clime import clime_full, sigma_hat
from .errors import HDGMMError, InputError, NumericalError
from .inference import (
    coordinate_variances,
    confidence_intervals,
    debias,
    two_step_pipeline,
)
from .lasso_gmm import CvConfig
from .panel import instrument_count, panel_to_gmm
from .simulate import DesignSpec, run_design

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


@contextmanager
def stage(name):
    try:
        yield
    except NumericalError as exc:
        raise StageError(name, exc) from exc


def log(msg):
    print(msg, file=sys.stderr, flush=True)


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("HDGMM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"HDGMM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_xzy(args):
    for flag in ("x", "z", "y"):
        if getattr(args, flag) is None:
            raise InputError(f"--{flag} is required")
    _, X = hio.read_matrix_csv(args.x, "X")
    _, Z = hio.read_matrix_csv(args.z, "Z")
    _, Y = hio.read_matrix_csv(args.y, "Y")
    if Y.shape[1] != 1:
        raise InputError(f"Y must have a single column, got {Y.shape[1]}")
    if not X.shape[0] == Z.shape[0] == Y.shape[0]:
        raise InputError(
            f"row counts differ: X has {X.shape[0]} rows, Z has {Z.shape[0]}, Y has {Y.shape[0]}"
        )
    return X, Z, Y[:, 0]


def _cv(args):
    if args.cv_folds < 2:
        raise InputError("--cv-folds must be at least 2")
    if args.grid_size < 2:
        raise InputError("--grid-size must be at least 2")
    return CvConfig(folds=args.cv_folds, grid_size=args.grid_size)


def cmd_fit(args):
    X, Z, Y = _load_xzy(args)
    with stage("two-step Lasso-GMM"):
        first, _, second = two_step_pipeline(X, Z, Y, _cv(args))
    header = ["j", "beta_first", "beta_hat"]
    rows = [[j + 1, first.beta[j], second.beta[j]] for j in range(X.shape[1])]
    meta = {"lambda_first": first.lam, "lambda_second": second.lam}
    _emit(hio.table_to_text(header, rows, args.format, meta), args.out)
    return EXIT_OK


def cmd_infer(args):
    if not 0 < args.alpha < 1:
        raise InputError(f"--alpha must lie in (0, 1), got {args.alpha}")
    X, Z, Y = _load_xzy(args)
    n, p = X.shape
    null = np.zeros(p)
    if args.null:
        _, nv = hio.read_matrix_csv(args.null, "null")
        nv = nv.ravel()
        if nv.shape[0] != p:
            raise InputError(f"null file has {nv.shape[0]} values, X has {p} columns")
        null = nv
    cv = _cv(args)
    with stage("two-step Lasso-GMM"):
        first, W, second = two_step_pipeline(X, Z, Y, cv)
    with stage("CLIME"):
        gamma = clime_full(sigma_hat(X, Z, W))
    with stage("debiasing"):
        b = debias(second.beta, gamma, X, Z, W, Y)
    with stage("variance"):
        var = coordinate_variances(gamma, X, Z, W, first.residuals)
    lower, upper = confidence_intervals(b, var, n, args.alpha)
    se = np.sqrt(var / n)
    t = (b - null) / se
    header = ["j", "beta_hat", "b_hat", "se", "t", "ci_lower", "ci_upper"]
    rows = [[j + 1, second.beta[j], b[j], se[j], t[j], lower[j], upper[j]] for j in range(p)]
    meta = {"n": n, "p": p, "q": Z.shape[1], "alpha": args.alpha,
            "lambda_first": first.lam, "lambda_second": second.lam}
    _emit(hio.table_to_text(header, rows, args.format, meta), args.out)
    return EXIT_OK


def _design_spec(args):
    params = {}
    if args.config:
        try:
            params = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
    for key, flag in [("design_id", "design"), ("n", "n"), ("p", "p"), ("q", "q"),
                      ("B", "reps"), ("base_seed", "seed")]:
        val = getattr(args, flag)
        if val is not None:
            params[key] = val
    if "base_seed" not in params:
        raise InputError("simulate requires --seed (or base_seed in the config)")
    missing = [k for k in ("design_id", "n", "p", "q") if k not in params]
    if missing:
        raise InputError(f"simulate is missing {', '.join(missing)}")
    params.setdefault("grid_size", args.grid_size)
    params.setdefault("folds", args.cv_folds)
    params.setdefault("alpha", args.alpha)
    try:
        return DesignSpec(**params)
    except TypeError as exc:
        raise InputError(f"bad design parameters: {exc}") from None


def cmd_simulate(args):
    spec = _design_spec(args)
    threads = _threads(args)
    log(f"design {spec.design_id} (n={spec.n}, p={spec.p}, q={spec.q}), B={spec.B}, "
        f"threads={threads}")
    start = time.perf_counter()
    with stage("simulation"):
        table = run_design(spec, threads=threads)
    log(f"finished in {time.perf_counter() - start:.1f}s")
    meta = dict(table.metadata)
    meta.pop("runtime_seconds", None)
    _emit(hio.table_to_text(["measure", "value"], table.rows(), args.format, meta), args.out)
    return EXIT_OK


def cmd_panel(args):
    if args.panel is None:
        raise InputError("--panel is required")
    data = hio.read_panel_csv(args.panel)
    stacked = panel_to_gmm(data)
    q = stacked.q
    formula = instrument_count(data.T, data.K)
    Z = stacked.Z
    keep = np.ones(q, dtype=bool) if args.keep_empty_instruments else np.any(Z != 0, axis=0)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    K = data.K
    hio.matrix_to_csv(outdir / "Y.csv", stacked.Y[:, None], ["dy"])
    hio.matrix_to_csv(outdir / "X.csv", stacked.X, ["dy_lag"] + [f"dx_{k + 1}" for k in range(K)])
    hio.matrix_to_csv(outdir / "Z.csv", Z[:, keep], [f"z_{l + 1}" for l in np.flatnonzero(keep)])
    print(f"n={data.n} T={data.T} K={K} rows={stacked.Y.shape[0]}")
    print(f"q={q} (T-2)(T-1)/2+T(T-1)K={formula} identity={'ok' if q == formula else 'FAILED'}")
    print(f"instrument columns written={int(keep.sum())}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hdgmm",
        description="Desparsified two-step Lasso-GMM estimation and inference.",
        epilog="Exit codes: 0 success, 2 input error, 3 numerical failure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--cv-folds", type=int, default=5, help="cross-validation folds (default 5)")
        p.add_argument("--grid-size", type=int, default=50, help="lambda grid size (default 50)")
        p.add_argument("--alpha", type=float, default=0.05, help="interval level 1 - alpha")
        p.add_argument("--format", choices=["csv", "json", "markdown"], default="csv")
        p.add_argument("--out", help="output file (panel: output directory)")
        p.add_argument("--seed", type=int, help="base seed; required by simulate")
        p.add_argument("--threads", type=int, help="worker processes (fallback: HDGMM_THREADS)")

    helps = {"fit": "two-step Lasso-GMM coefficients",
             "infer": "debiased estimates, standard errors, t-statistics and intervals"}
    for name in ("fit", "infer"):
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--x", help="CSV of regressors (n x p, header row)")
        p.add_argument("--z", help="CSV of instruments (n x q, header row)")
        p.add_argument("--y", help="CSV of the outcome (n x 1, header row)")
        p.add_argument("--null", help="CSV of p null values for the t-statistics (default 0)")
        common(p)

    p = sub.add_parser("simulate", help="Monte Carlo size/power/coverage/length/MSE table")
    p.add_argument("--config", help="JSON file with DesignSpec fields")
    p.add_argument("--design", type=int, choices=[1, 2, 3])
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--reps", type=int, help="replications B (default 100)")
    common(p)

    p = sub.add_parser("panel", help="first-difference a long-format panel into Y/X/Z CSVs")
    p.add_argument("--panel", help="CSV with columns unit,period,y,x_1..x_K")
    p.add_argument("--keep-empty-instruments", action="store_true",
                   help="also write instrument columns that are zero on every row")
    common(p)
    return parser


COMMANDS = {"fit": cmd_fit, "infer": cmd_infer, "simulate": cmd_simulate, "panel": cmd_panel}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        log(f"error: numerical failure in stage {exc}")
        return EXIT_NUMERIC
    except InputError as exc:
        log(f"error: {exc}")
        return EXIT_INPUT
    except NumericalError as exc:
        log(f"error: numerical failure: {exc}")
        return EXIT_NUMERIC
    except HDGMMError as exc:
        log(f"error: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
