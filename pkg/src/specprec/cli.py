"""Command-line surface: fit / eval / path / sparsify / screen / simulate / bench.

Exit codes are stable: 0 success, 2 usage error, 3 data error, 4 numeric
error.  Failures emit a machine-parsable JSON object on stderr.  All
commands are deterministic given their flags and seed; BLAS threading is
pinned to --threads (default 1) for reproducibility.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import tracemalloc
from contextlib import nullcontext

import numpy as np

from . import dataset, experiment, model as model_mod, sparsify as sparsify_mod
from . import spectral, spiked
from .errors import DataError, NumericError, SpecprecError, UsageError

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _thread_limit(threads: int):
    try:
        from threadpoolctl import threadpool_limits
        return threadpool_limits(limits=threads)
    except ImportError:  # pragma: no cover - threadpoolctl ships with scipy stacks
        return nullcontext()


def parse_rho_grid(spec: str) -> np.ndarray:
    """Parse 'lo:hi:log|lin:count' into a rho grid."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise UsageError("rho grid must look like lo:hi:log|lin:count", got=spec)
    try:
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[3])
    except ValueError:
        raise UsageError("rho grid bounds/count do not parse", got=spec) from None
    scale = parts[2]
    if lo <= 0 or hi < lo or count < 1:
        raise UsageError("rho grid needs 0 < lo <= hi and count >= 1", got=spec)
    if scale == "log":
        return np.logspace(np.log10(lo), np.log10(hi), count)
    if scale == "lin":
        return np.linspace(lo, hi, count)
    raise UsageError("rho grid scale must be 'log' or 'lin'", got=spec)


DEFAULT_RHO_GRID = "0.001:10:log:20"


def _load_input(args) -> dataset.DataMatrix:
    data = dataset.load_csv(args.input, delimiter=args.delimiter,
                            has_header=args.has_header,
                            orientation=args.orientation)
    return data


def _prepare(args):
    data = _load_input(args)
    data = dataset.center(data)
    if args.standardize:
        data = dataset.standardize(data)
        data = dataset.center(data)
    return data


def _write_csv_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _centered_validation(args, basis):
    val = dataset.load_csv(args.val, delimiter=args.delimiter,
                           has_header=args.has_header,
                           orientation=args.orientation)
    if val.n_vars != basis.n_vars:
        raise DataError("validation data dimension mismatch",
                        expected=basis.n_vars, got=val.n_vars)
    return dataset.DataMatrix(values=val.values - basis.mean[:, None])


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    data = _prepare(args)
    basis = spectral.thin_svd(data)
    selected = None
    if args.rho is not None:
        rho = args.rho
    else:
        grid = parse_rho_grid(args.rho_grid)
        if args.val is None:
            raise UsageError("--rho-grid needs --val to select rho")
        path = spectral.solution_path(basis, grid, args.method)
        rho, _ = spectral.select_rho_by_validation(
            path, _centered_validation(args, basis))
        selected = rho
    fit = (spectral.riccati_fit if args.method == "riccati"
           else spectral.tikhonov_fit)
    fitted = fit(basis, rho)
    model_mod.save_model_with_rho(fitted, args.output, rho=rho)
    wall = time.perf_counter() - t0
    report = {
        "method": args.method,
        "n_vars": basis.n_vars,
        "n_samples": basis.n_samples,
        "rank": basis.rank,
        "rho": rho,
        "rho_selected_by_validation": selected is not None,
        "alpha": fitted.bounds.alpha,
        "beta": fitted.bounds.beta,
        "zero_variance_vars": list(data.zero_variance),
        "wall_time_s": wall,
        "peak_factor_bytes_estimate": 8 * basis.n_vars * (basis.rank + 2),
    }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    if data.zero_variance:
        print(f"warning: {len(data.zero_variance)} zero-variance variables",
              file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    fitted = model_mod.load_model(args.model)
    if not fitted.pd_certified:
        fitted = model_mod.orthonormalize(fitted)
    data = dataset.load_csv(args.input, delimiter=args.delimiter,
                            has_header=args.has_header,
                            orientation=args.orientation)
    if data.n_vars != fitted.n_vars:
        raise DataError("test data dimension mismatch",
                        expected=fitted.n_vars, got=data.n_vars)
    avg_ll = model_mod.average_log_likelihood(fitted, data)
    rows = [("avg_neg_loglik", -avg_ll), ("n_samples", data.n_samples)]
    if args.scenario:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        truth = spiked.random_spiked(doc["n"], doc["k"], doc["beta"],
                                     doc["density"], doc["seed"])
        sigma = spiked.true_covariance(truth)
        # -0.5 logdet Sigma* - N/2 + 0.5 * avg NLL estimates KL(P || model)
        adjusted = -0.5 * sigma.logdet() - 0.5 * fitted.n_vars - 0.5 * avg_ll
        rows.append(("entropy_adjusted_neg_loglik", adjusted))
    _write_csv_rows(args.output, ("metric", "value"), rows)
    return 0


def cmd_path(args) -> int:
    data = _prepare(args)
    basis = spectral.thin_svd(data)
    grid = parse_rho_grid(args.rho_grid)
    path = spectral.solution_path(basis, grid, args.method)
    if args.val is not None:
        _, table = spectral.select_rho_by_validation(
            path, _centered_validation(args, basis))
        scores = table[:, 1]
    else:
        scores = [float("nan")] * len(path)
    rows = []
    for i in range(len(path)):
        b = spectral.eigen_bounds(basis.spec_norm_cov, float(path.rhos[i]),
                                  args.method)
        rows.append((path.rhos[i], b.alpha, b.beta, scores[i]))
    _write_csv_rows(args.output, ("rho", "alpha", "beta", "val_score"), rows)
    return 0


def cmd_sparsify(args) -> int:
    fitted, stored_rho = model_mod.load_model_with_rho(args.model)
    lam = args.lam
    if lam is None:
        if stored_rho is None:
            raise UsageError("--lambda required: model file carries no rho default")
        lam = stored_rho
    sparse_model, report = sparsify_mod.sparsify_model(fitted, lam, args.mode)
    model_mod.save_model(sparse_model, args.output)
    if args.report:
        sparsify_mod.save_report(report, args.report)
    return 0


def cmd_screen(args) -> int:
    fitted = model_mod.load_model(args.model)
    if not fitted.pd_certified:
        fitted = model_mod.orthonormalize(fitted)
    unimportant, q = model_mod.screen_unimportant(fitted, args.epsilon)
    with open(args.unimportant_out, "w", encoding="utf-8") as fh:
        for n in unimportant:
            fh.write(f"{int(n)}\n")
    edges = model_mod.important_edges(fitted, args.epsilon, args.max_edges)
    _write_csv_rows(args.edges_out, ("n1", "n2", "partial_correlation"), edges)
    return 0


def cmd_simulate(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    config = experiment.ScenarioConfig.from_dict(doc)
    rows = experiment.run_scenario(config)
    _write_csv_rows(args.output, experiment.RESULT_COLUMNS, rows)
    return 0


def cmd_bench(args) -> int:
    try:
        n_grid = [int(v) for v in args.n_grid.split(",")]
    except ValueError:
        raise UsageError("bench N grid must be comma-separated integers",
                         got=args.n_grid) from None
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in n_grid:
        raw = dataset.DataMatrix(values=rng.standard_normal((n, args.t)))
        best = np.inf
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            centered = dataset.center(raw)
            basis = spectral.thin_svd(centered)
            spectral.riccati_fit(basis, args.rho)
            best = min(best, time.perf_counter() - t0)
        peak_bytes = 8 * n * (basis.rank + 2)
        rows.append((n, args.t, best, peak_bytes))
    _write_csv_rows(args.output, ("n", "t", "fit_seconds", "peak_factor_bytes"),
                    rows)
    return 0


def _add_io_flags(p):
    p.add_argument("--delimiter", default=",")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--orientation", default="variables-as-rows",
                   choices=["variables-as-rows", "samples-as-rows"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specprec",
        description="Spectral inverse-covariance estimation for N >> T data.")
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS thread cap (default 1 for reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a precision model from a CSV dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="model JSON path")
    p.add_argument("--report", help="fit report JSON path")
    p.add_argument("--method", default="riccati", choices=["riccati", "tikhonov"])
    p.add_argument("--rho", type=float)
    p.add_argument("--rho-grid", default=DEFAULT_RHO_GRID)
    p.add_argument("--val", help="validation CSV used to select rho from the grid")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _add_io_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="average negative log-likelihood on a test CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="metrics CSV path")
    p.add_argument("--scenario", help="spiked scenario JSON for entropy subtraction")
    _add_io_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("path", help="regularization path summary CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", default="riccati", choices=["riccati", "tikhonov"])
    p.add_argument("--rho-grid", default=DEFAULT_RHO_GRID)
    p.add_argument("--val")
    p.add_argument("--standardize", action="store_true")
    _add_io_flags(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("sparsify", help="threshold a fitted model's basis")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True, help="sparse model JSON path")
    p.add_argument("--report", help="sparsify report JSON path")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="threshold scale; defaults to the model's stored rho")
    p.add_argument("--mode", default="soft", choices=["soft", "hard"])
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("screen", help="unimportant variables and important edges")
    p.add_argument("--model", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--max-edges", type=int, default=1000)
    p.add_argument("--unimportant-out", required=True)
    p.add_argument("--edges-out", required=True)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("simulate", help="run a spiked-covariance scenario")
    p.add_argument("--scenario", required=True, help="scenario config JSON")
    p.add_argument("--output", required=True, help="results CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="fit-time scaling over a size grid")
    p.add_argument("--t", type=int, default=64)
    p.add_argument("--n-grid", default="4096,8192,16384,32768")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def _emit_error(code: int, exc: SpecprecError) -> None:
    doc = {"code": code, "message": exc.message,
           "context": {k: _jsonable(v) for k, v in exc.context.items()}}
    print(json.dumps(doc), file=sys.stderr)


def _jsonable(v):
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    return v


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SpecprecError as exc:
        _emit_error(EXIT_USAGE, exc)
        return EXIT_USAGE
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except UsageError as exc:
        _emit_error(EXIT_USAGE, exc)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        _emit_error(EXIT_DATA, DataError(str(exc)))
        return EXIT_DATA
    except DataError as exc:
        _emit_error(EXIT_DATA, exc)
        return EXIT_DATA
    except NumericError as exc:
        _emit_error(EXIT_NUMERIC, exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
