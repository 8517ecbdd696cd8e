"""Command-line front end.

Subcommands: ``fit`` estimates coefficients from CSV data, ``simulate``
materializes a synthetic dataset, ``bootstrap`` adds standard errors and an
optional coefficient test to a fit, ``bench`` times fits over a grid of
choice-set sizes, and ``table`` runs a named Monte-Carlo experiment.  Table
and bench reports render a figure next to the delimited output.

Exit codes: 0 on success, 1 on usage errors, 2 on data or numerical
failures.  Outputs are byte-reproducible for a fixed seed and any thread
count; per-iteration wall times are reported only with ``--timings``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .constraints import ConstraintSpec
from .engine import IdcSettings, idc_fit, idc_fit_constrained
from .exceptions import IdmrError
from .executor import ExecutorConfig
from .glm import GlmSettings
from .inference import BootstrapSettings, bootstrap, wald_test
from .io import (
    ensure_parent,
    format_rows_text,
    load_constraints,
    load_dataset,
    read_theta,
    write_fit,
    write_matrix_csv,
    write_rows_csv,
)
from .plots import save_bench_figure, save_mse_figure, save_size_power_figure
from .simulate import (
    DgpSpec,
    SizePowerSpec,
    TableSpec,
    draw_dgp,
    run_bench,
    run_size_power,
    run_table,
)

TABLE_NAMES = ("idc-consistent", "mle", "idc-inconsistent", "dgp-comparison", "size-power")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _target(text: str) -> tuple[int, int]:
    try:
        k, j = text.split(":")
        return int(k), int(j)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k:j with 0-based indices, got {text!r}")


def _add_data_flags(sub):
    sub.add_argument("--counts", required=True, help="counts CSV (n rows, d integer columns)")
    sub.add_argument("--covariates", required=True, help="covariates CSV (n rows, p columns)")
    sub.add_argument(
        "--add-intercept", action="store_true", help="prepend a constant column of ones"
    )
    sub.add_argument("--header", action="store_true", help="skip one header line in the CSVs")
    sub.add_argument(
        "--base-column",
        type=int,
        default=None,
        help="move this counts column (0-based) to the end to act as the base category",
    )


def _add_fit_flags(sub):
    sub.add_argument(
        "--init",
        default="binomial",
        choices=["binomial", "taddy", "poisson", "zeros", "file"],
        help="starting point (default binomial; 'file' reads --init-file)",
    )
    sub.add_argument("--init-file", default=None, help="fit JSON supplying the starting point")
    sub.add_argument(
        "--iterations", type=int, default=None, help="update steps S (default: ceil(log n))"
    )
    sub.add_argument(
        "--early-stop-tol",
        type=float,
        default=1e-8,
        help="stop once the sup-norm step falls below this (0 disables)",
    )
    sub.add_argument("--grad-tol", type=float, default=1e-8, help="inner solver gradient tolerance")
    sub.add_argument("--constraints", default=None, help="equality-constraint file")
    sub.add_argument("--timings", action="store_true", help="include wall times in the output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idmr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"idmr {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (falls back to IDMR_THREADS, then the CPU count)",
    )
    common.add_argument("--seed", type=int, default=0, help="random seed")
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", parents=[common], help="estimate coefficients from CSV data")
    _add_data_flags(fit)
    _add_fit_flags(fit)
    fit.add_argument("--out", required=True, help="output JSON path")

    sim = subs.add_parser("simulate", parents=[common], help="materialize a synthetic dataset")
    sim.add_argument("--dgp", required=True, choices=["a", "b", "c"])
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--d", type=int, required=True)
    sim.add_argument("--p", type=int, default=5)
    sim.add_argument("--out", required=True, help="output prefix for the three CSV files")

    boot = subs.add_parser(
        "bootstrap", parents=[common], help="fit, bootstrap standard errors, optional test"
    )
    _add_data_flags(boot)
    _add_fit_flags(boot)
    boot.add_argument("--replicates", type=int, default=500, help="bootstrap replicates B")
    boot.add_argument("--level", type=float, default=0.05, help="test level")
    boot.add_argument(
        "--target", type=_target, default=None, help="coefficient to test, 0-based k:j"
    )
    boot.add_argument("--null", type=float, default=0.0, help="null value for the target")
    boot.add_argument(
        "--reinitialize",
        action="store_true",
        help="re-run the initializer per replicate instead of warm-starting",
    )
    boot.add_argument("--out", required=True, help="output JSON path")

    bench = subs.add_parser(
        "bench", parents=[common], help="time fits over a grid of choice-set sizes"
    )
    bench.add_argument("--d-list", type=_int_list, default=(10, 20, 40, 80))
    bench.add_argument("--n", type=int, default=500)
    bench.add_argument("--p", type=int, default=5)
    bench.add_argument("--iterations", type=int, default=10)
    bench.add_argument("--init", default="binomial", choices=["binomial", "taddy", "poisson", "zeros"])
    bench.add_argument("--reps", type=int, default=3, help="fits averaged per grid point")
    bench.add_argument("--out", default=None, help="output CSV path (figure saved alongside)")

    table = subs.add_parser(
        "table", parents=[common], help="run a named Monte-Carlo experiment at desk scale"
    )
    table.add_argument("--name", required=True, choices=list(TABLE_NAMES))
    table.add_argument("--reps", type=int, default=None, help="override replication count")
    table.add_argument("--d-list", type=_int_list, default=None)
    table.add_argument("--n-list", type=_int_list, default=None)
    table.add_argument("--s-list", type=_int_list, default=None)
    table.add_argument("--deviations", type=_float_list, default=None, help="size-power only")
    table.add_argument("--bootstrap-replicates", type=int, default=None, help="size-power only")
    table.add_argument("--timings", action="store_true", help="include mean wall times")
    table.add_argument("--out", required=True, help="output CSV path (figure saved alongside)")
    return parser


def _executor(args) -> ExecutorConfig:
    if args.threads is not None:
        return ExecutorConfig(worker_count=args.threads)
    return ExecutorConfig.from_env()


def _idc_settings(args) -> IdcSettings:
    tol = args.early_stop_tol if args.early_stop_tol and args.early_stop_tol > 0 else None
    return IdcSettings(
        iterations=args.iterations,
        early_stop_tol=tol,
        glm=GlmSettings(grad_tol=args.grad_tol),
    )


def _resolve_cli_init(args):
    if args.init == "file":
        if not args.init_file:
            raise IdmrError("--init file requires --init-file")
        return read_theta(args.init_file)
    return args.init


def _cmd_fit(args) -> int:
    data = load_dataset(
        args.counts, args.covariates, args.add_intercept, args.header, args.base_column
    )
    settings = _idc_settings(args)
    executor = _executor(args)
    init = _resolve_cli_init(args)
    if args.constraints:
        spec = load_constraints(args.constraints)
        result = idc_fit_constrained(data, spec, init, settings, executor)
    else:
        result = idc_fit(data, init, settings, executor)
    write_fit(result, ensure_parent(args.out), seed=args.seed, include_wall_times=args.timings)
    final = result.objective_trace[-1] if result.objective_trace else float("nan")
    print(
        f"fit: {data.n} observations, {data.d} choices, {data.p} covariates; "
        f"{result.iterations_run} iterations, objective {final:.6g}, wrote {args.out}"
    )
    return 0


def _cmd_simulate(args) -> int:
    spec = DgpSpec(kind=args.dgp, n=args.n, d=args.d, p=args.p, seed=args.seed)
    draw = draw_dgp(spec)
    prefix = Path(args.out)
    counts_path = prefix.with_name(prefix.name + "_counts.csv")
    covariates_path = prefix.with_name(prefix.name + "_covariates.csv")
    theta_path = prefix.with_name(prefix.name + "_theta.csv")
    write_matrix_csv(draw.data.counts.counts, ensure_parent(counts_path))
    write_matrix_csv(draw.data.covariates.values, ensure_parent(covariates_path))
    write_matrix_csv(draw.theta_star.rows, ensure_parent(theta_path))
    print(f"simulate: wrote {counts_path}, {covariates_path}, {theta_path}")
    return 0


def _cmd_bootstrap(args) -> int:
    data = load_dataset(
        args.counts, args.covariates, args.add_intercept, args.header, args.base_column
    )
    settings = _idc_settings(args)
    executor = _executor(args)
    init = _resolve_cli_init(args)
    if args.constraints:
        spec = load_constraints(args.constraints)
        result = idc_fit_constrained(data, spec, init, settings, executor)
    else:
        result = idc_fit(data, init, settings, executor)
    boot = bootstrap(
        data,
        result.theta,
        BootstrapSettings(replicates=args.replicates, idc=settings, seed=args.seed),
        executor,
        reinitialize=args.reinitialize,
    )
    document_path = ensure_parent(args.out)
    write_fit(result, document_path, seed=args.seed, include_wall_times=args.timings)
    with open(document_path) as handle:
        document = json.load(handle)
    document["bootstrap"] = {
        "replicates": args.replicates,
        "seed": boot.seed,
        "failed": list(boot.failed),
        "se": [[float(x) for x in row] for row in boot.se],
    }
    if args.target is not None:
        statistic, reject = wald_test(
            result.theta, boot, data.n, args.target, args.null, args.level
        )
        document["test"] = {
            "target": list(args.target),
            "null": args.null,
            "level": args.level,
            "statistic": statistic,
            "reject": bool(reject),
        }
        print(
            f"bootstrap: target {args.target} statistic {statistic:.4f} "
            f"{'rejects' if reject else 'does not reject'} null {args.null} at level {args.level}"
        )
    with open(document_path, "w") as handle:
        json.dump(document, handle, indent=1)
        handle.write("\n")
    print(f"bootstrap: {args.replicates} replicates, {len(boot.failed)} failed, wrote {args.out}")
    return 0


def _cmd_bench(args) -> int:
    executor = _executor(args)
    rows = run_bench(
        d_values=args.d_list,
        n=args.n,
        p=args.p,
        s=args.iterations,
        init=args.init,
        reps=args.reps,
        seed=args.seed,
        executor=executor,
    )
    columns = ["d", "seconds"]
    print(format_rows_text(rows, columns))
    times = {row.d: row.seconds for row in rows}
    ds = sorted(times)
    if len(ds) >= 2:
        slope = np.polyfit(ds, [times[d] for d in ds], 1)[0]
        print(f"bench: least-squares slope {slope:.4g} s per choice")
    if args.out:
        write_rows_csv(rows, ensure_parent(args.out), columns)
        save_bench_figure(rows, Path(args.out).with_suffix(".png"))
        print(f"bench: wrote {args.out} and {Path(args.out).with_suffix('.png')}")
    return 0


def _named_table_spec(args):
    reps = args.reps
    if args.name == "idc-consistent":
        spec = TableSpec(
            dgp="a",
            estimators=("idc-binomial",),
            s_values=args.s_list or (10,),
            d_values=args.d_list or (10, 20),
            n_values=args.n_list or (500, 1000, 2000),
            reps=reps or 100,
            seed=args.seed,
        )
    elif args.name == "mle":
        spec = TableSpec(
            dgp="a",
            estimators=("mle",),
            s_values=(0,),
            d_values=args.d_list or (10, 20),
            n_values=args.n_list or (500, 1000, 2000),
            reps=reps or 100,
            seed=args.seed,
        )
    elif args.name == "idc-inconsistent":
        spec = TableSpec(
            dgp="a",
            estimators=("idc-taddy", "idc-poisson"),
            s_values=args.s_list or (10, 40),
            d_values=args.d_list or (10, 20),
            n_values=args.n_list or (500, 1000),
            reps=reps or 100,
            seed=args.seed,
        )
    else:
        spec = TableSpec(
            dgp="a",
            estimators=("mle", "idc-binomial", "idc-taddy", "idc-poisson"),
            s_values=args.s_list or (20,),
            d_values=args.d_list or (20,),
            n_values=args.n_list or (500,),
            reps=reps or 100,
            seed=args.seed,
        )
    return spec


def _cmd_table(args) -> int:
    executor = _executor(args)
    out = ensure_parent(args.out)
    figure_path = Path(args.out).with_suffix(".png")
    if args.name == "size-power":
        spec = SizePowerSpec(
            n=(args.n_list or (250,))[0],
            d=(args.d_list or (20,))[0],
            s=(args.s_list or (10,))[0],
            bootstrap_replicates=args.bootstrap_replicates or 200,
            mc_reps=args.reps or 100,
            deviations=args.deviations or (-0.2, -0.1, 0.0, 0.1, 0.2),
            seed=args.seed,
        )
        rows = run_size_power(spec, executor)
        columns = ["deviation", "rejection_rate", "reps"]
        write_rows_csv(rows, out, columns)
        save_size_power_figure(rows, figure_path)
        print(format_rows_text(rows, columns))
    else:
        spec = _named_table_spec(args)
        if args.name == "dgp-comparison":
            rows = []
            for dgp in ("a", "b", "c"):
                rows.extend(run_table(replace(spec, dgp=dgp), executor))
        else:
            rows = run_table(spec, executor)
        columns = ["dgp", "estimator", "s", "d", "n", "mse_mean", "reps"]
        if args.timings:
            columns.insert(6, "time_mean")
        write_rows_csv(rows, out, columns)
        save_mse_figure(rows, figure_path)
        print(format_rows_text(rows, columns))
    print(f"table: wrote {args.out} and {figure_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "fit": _cmd_fit,
        "simulate": _cmd_simulate,
        "bootstrap": _cmd_bootstrap,
        "bench": _cmd_bench,
        "table": _cmd_table,
    }
    try:
        return handlers[args.command](args)
    except IdmrError as err:
        print(f"idmr: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"idmr: error: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
