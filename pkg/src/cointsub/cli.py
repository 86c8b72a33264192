"""Command-line entry point: ``cointsub simulate|test|scan-blocks|bandwidth|mc``.

Exit status is 0 on success, 2 for configuration or usage errors, 3 for
unreadable or malformed data and 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    CellError,
    CointsubError,
    DataError,
    DebiasError,
    DegenerateStatistic,
    DistributionError,
    DomainError,
    LengthError,
    OptimizationError,
    RankError,
    UsageError,
)
from .io import (
    RunManifest,
    read_config,
    read_dataset,
    simulate_from_config,
    process_from_values,
    suite_from_config,
    timestamp,
    manifest_path,
    write_csv,
    write_jsonl,
    write_series,
)
from .kernel import BandwidthRule, default_bandwidth_grid, lcv_curve, parse_grid, select_bandwidth
from .models import fit, nonparametric_residuals, residuals
from .montecarlo import (
    config_to_dict,
    default_blocks,
    gen_response,
    run_cell,
    statistic_samples,
    RejectionTable,
)
from .processes import SeriesPair, gen_errors, gen_innovations, gen_shocks
from .subsampling import block_scan, debias_mhm, minimal_volatility, pvalue_snu, subsample_snu
from .teststats import TestOutcome, WeightWindow, mhm_normalize, mhm_statistic, portmanteau_many, snu_statistic

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_NUMERIC = (RankError, OptimizationError, DegenerateStatistic, DistributionError,
            DebiasError, CellError, np.linalg.LinAlgError)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (DataError, LengthError)):
        return EXIT_DATA
    if isinstance(exc, _NUMERIC):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _rule(text):
    try:
        return BandwidthRule.parse(text)
    except (UsageError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _window(text):
    try:
        return WeightWindow.parse(text)
    except (UsageError, DomainError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _range(text):
    try:
        lo, hi = (int(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cointsub",
        description="Specification tests for cointegrating regression with subsampling.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--out", type=Path, default=None, help="output file")
    common.add_argument("--bandwidth-rule", type=_rule, default=BandwidthRule(),
                        help="power[:exp] or fixed:h (default power:-1/3)")
    common.add_argument("--memory", choices=("lm", "slm"), default="lm")
    common.add_argument("--d", type=float, default=0.1)
    common.add_argument("--lambda", dest="lam", type=float, default=0.0)
    common.add_argument("--window", type=_window, default=WeightWindow(), help="lo,hi")
    common.add_argument("--grid-points", type=int, default=4001)
    common.add_argument("--alpha", type=float, default=0.05)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("data", type=Path, help="CSV with a header row")
    data.add_argument("--x-col", default="x")
    data.add_argument("--y-col", default="y")
    data.add_argument("--log-x", action="store_true")
    data.add_argument("--log-y", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="simulate a regressor/response path")
    p.add_argument("config", type=Path, nargs="?", help="INI file with [process] and [model]")
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--errors", choices=("ar1", "ma1"))
    p.add_argument("--gen-model")

    p = sub.add_parser("test", parents=[common, data], help="fit a hypothesis and test it")
    p.add_argument("--hypothesis", default="linear", help="linear, quadratic or exp")
    p.add_argument("--test", choices=("snu", "mhm", "p"), default="snu")
    p.add_argument("--blocks", "--block", type=_int_list, default=None)
    p.add_argument("--residuals", choices=("parametric", "nonparametric"), default="parametric")
    p.add_argument("--p", dest="ar_order", type=int, default=1, help="AR order for the P test")
    p.add_argument("--lags", type=_int_list, default=[6, 12, 18])
    p.add_argument("--M", dest="M", type=int, default=None, help="number of blocks")

    p = sub.add_parser("scan-blocks", parents=[common, data], help="p-value against block length")
    p.add_argument("--hypothesis", default="linear")
    p.add_argument("--stat", choices=("snu", "mhm"), default="snu")
    p.add_argument("--b-range", type=_range, default=None, help="lo:hi inclusive")
    p.add_argument("--residuals", choices=("parametric", "nonparametric"), default="parametric")
    p.add_argument("--volatility-window", type=int, default=5)

    p = sub.add_parser("bandwidth", parents=[common, data], help="LCV bandwidth selection")
    p.add_argument("--grid", default=None, help="start:step:stop or comma list")

    p = sub.add_parser("mc", parents=[common], help="run a Monte Carlo suite")
    p.add_argument("suite", type=Path, help="INI file with [suite] and [cell:<name>] sections")
    p.add_argument("--reps", type=int, default=None, help="override reps in every cell")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--samples", type=Path, default=None,
                   help="also dump raw full-sample statistics to this CSV")
    return parser


def _manifest(args, config: dict, started: str, argv) -> RunManifest:
    return RunManifest(command=args.command, config=config, seed=args.seed,
                       version=__version__, started=started, finished=timestamp(),
                       argv=list(argv))


def _load(args, min_n=10):
    return read_dataset(args.data, x_col=args.x_col, y_col=args.y_col,
                        log_x=args.log_x, log_y=args.log_y, min_n=min_n)


def _subsample_residuals(kind, x, y, u_hat, h):
    return nonparametric_residuals(x, y, h) if kind == "nonparametric" else u_hat


def cmd_simulate(args) -> dict:
    proc_vals, gen_model, params = ({}, "NULL_LINEAR", {})
    if args.config is not None:
        proc_vals, gen_model, params = simulate_from_config(read_config(args.config))
    overrides = {"n": args.n, "r": args.r, "sigma": args.sigma, "errors": args.errors,
                 "seed": args.seed}
    proc_vals.update({k: v for k, v in overrides.items() if v is not None})
    if args.config is None or "memory" not in proc_vals:
        proc_vals.setdefault("memory", args.memory)
    if args.config is None:
        proc_vals.setdefault("d", args.d)
        proc_vals.setdefault("lambda", args.lam)
    gen_model = (args.gen_model or gen_model).upper()
    proc = process_from_values(proc_vals)
    if args.out is None:
        raise UsageError("simulate needs --out")
    innov = gen_innovations(proc.n, proc.trunc, proc.r, proc.seed)
    x = np.cumsum(gen_shocks(proc, innov))
    u = gen_errors(proc, innov)
    y = gen_response(gen_model, x, u, proc.sigma, params)
    f = gen_response(gen_model, x, np.zeros_like(u), 0.0, params)
    write_series(args.out, SeriesPair(x, y, u), residual=y - f)
    print(f"wrote {proc.n} rows to {args.out}")
    cfg = {"process": proc_vals, "gen_model": gen_model, "params": params}
    args.seed = proc.seed
    return cfg


def _test_outcomes(args, ds):
    x, y = ds.x, ds.y
    n = ds.n
    h = args.bandwidth_rule(n)
    model = fit(args.hypothesis, x, y)
    u_hat = residuals(model, x, y)
    fit_meta = {"hypothesis": model.family, "params": model.params.tolist(), "q": model.q}
    if args.test == "p":
        outs = portmanteau_many(u_hat, args.ar_order, args.lags)
        for o in outs:
            o.meta.update(fit_meta)
        return outs
    blocks = args.blocks or default_blocks(n)
    for b in blocks:
        if not 2 <= b <= n - 1:
            raise UsageError(f"block length {b} outside [2, N-1] for N={n}")
    u_sub = _subsample_residuals(args.residuals, x, y, u_hat, h)
    outs = []
    if args.test == "snu":
        z = snu_statistic(u_hat, x, h)
        if z.degenerate:
            raise DegenerateStatistic("full-sample V_N is zero")
        for b in blocks:
            m = None if args.M is None else min(args.M, n - b + 1)
            dist = subsample_snu(x, u_sub, b, m, args.bandwidth_rule)
            outs.append(TestOutcome("SNU", z.s, z.z, pvalue_snu(z.z, dist), {
                **fit_meta, "b": b, "M": dist.M, "h": h, "h_b": dist.h_b,
                "skipped": dist.skipped, "residuals": args.residuals,
                "reference": "subsampling",
            }))
        return outs
    kind = args.memory.upper()
    t_n = mhm_statistic(u_hat, x, h, args.window, args.grid_points, method="exact")
    stat = mhm_normalize(t_n, n, h, kind, args.d, args.lam)
    rep = debias_mhm(x, u_sub, kind, args.d, args.lam, h_rule=args.bandwidth_rule,
                     window=args.window, blocks=blocks, statistic=stat, M=args.M,
                     grid_points=args.grid_points)
    for b in blocks:
        outs.append(TestOutcome("MHM-debiased", t_n, stat, rep.pvalues[b], {
            **fit_meta, "b": b, "h": h, "bias_n": rep.bias_n, "b1": rep.b1, "b2": rep.b2,
            "slope": rep.slope, "debiased": rep.debiased_statistic,
            "residuals": args.residuals, "reference": "subsampling",
        }))
    return outs


def _outcome_table(outs) -> str:
    lines = [f"{'test':<14} {'setting':>10} {'statistic':>14} {'normalized':>14} {'p-value':>9}"]
    for o in outs:
        setting = f"L={o.meta['L']}" if "L" in o.meta else f"b={o.meta.get('b')}"
        lines.append(f"{o.test:<14} {setting:>10} {o.statistic:>14.6g} {o.normalized:>14.6g} "
                     f"{o.pvalue:>9.3f}")
    return "\n".join(lines)


def cmd_test(args) -> dict:
    ds = _load(args)
    outs = _test_outcomes(args, ds)
    print(_outcome_table(outs))
    if args.out is not None:
        write_jsonl(args.out, outs)
    return _data_config(args)


def _data_config(args) -> dict:
    skip = {"func", "command"}
    cfg = {}
    for k, v in vars(args).items():
        if k in skip:
            continue
        cfg[k] = str(v) if isinstance(v, (Path, BandwidthRule, WeightWindow)) else v
    return cfg


def cmd_scan_blocks(args) -> dict:
    ds = _load(args)
    n = ds.n
    lo, hi = args.b_range or (2, n - 1)
    if not 2 <= lo <= hi <= n - 1:
        raise UsageError(f"b-range must satisfy 2 <= lo <= hi <= N-1 = {n - 1}")
    h = args.bandwidth_rule(n)
    model = fit(args.hypothesis, ds.x, ds.y)
    u_hat = residuals(model, ds.x, ds.y)
    u_sub = _subsample_residuals(args.residuals, ds.x, ds.y, u_hat, h)
    bs, ps = block_scan(ds.x, u_hat, u_sub, args.stat, range(lo, hi + 1), args.bandwidth_rule,
                        kind=args.memory.upper(), d=args.d, lam=args.lam, window=args.window)
    if np.all(np.isnan(ps)):
        raise DistributionError("every block length failed (degenerate subsample statistics)")
    if args.out is not None:
        write_csv(args.out, ["b", "pvalue"], [bs, ps])
    else:
        for b, p in zip(bs, ps):
            print(f"{b},{p:.17g}")
    if bs.size >= args.volatility_window:
        ok = np.isfinite(ps)
        print(f"minimal-volatility block: b={minimal_volatility(bs[ok], ps[ok], args.volatility_window)}")
    return _data_config(args)


def cmd_bandwidth(args) -> dict:
    ds = _load(args, min_n=2)
    grid = parse_grid(args.grid) if args.grid else default_bandwidth_grid(ds.x)
    h_opt, score = select_bandwidth(ds.x, ds.y, grid)
    scores, excluded = lcv_curve(ds.x, ds.y, grid)
    print(f"h_opt={h_opt:.6g} score={score:.6g}")
    if args.out is not None:
        write_csv(args.out, ["h", "score", "excluded"], [grid, scores, excluded])
    return _data_config(args)


def cmd_mc(args) -> dict:
    cells = suite_from_config(read_config(args.suite))
    if args.reps is not None:
        cells = [replace(c, reps=args.reps) for c in cells]
    if args.seed is not None:
        cells = [replace(c, base_seed=args.seed + i) for i, c in enumerate(cells)]
    table = RejectionTable()
    for cfg in cells:
        table = table + run_cell(cfg, args.workers)
    if args.out is not None:
        table.to_csv(args.out)
    sys.stdout.write(table.to_text())
    if args.samples is not None:
        labels, reps, snu, mhm = [], [], [], []
        for cfg in cells:
            s = statistic_samples(cfg)
            labels += [cfg.label] * cfg.reps
            reps += list(range(cfg.reps))
            snu += list(s["snu"])
            mhm += list(s["mhm"])
        _write_samples(args.samples, labels, reps, snu, mhm)
    return {"suite": str(args.suite), "cells": [config_to_dict(c) for c in cells]}


def _write_samples(path, labels, reps, snu, mhm):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "rep", "snu", "mhm"])
        for row in zip(labels, reps, snu, mhm):
            w.writerow([row[0], row[1], f"{row[2]:.17g}", f"{row[3]:.17g}"])


COMMANDS = {
    "simulate": cmd_simulate,
    "test": cmd_test,
    "scan-blocks": cmd_scan_blocks,
    "bandwidth": cmd_bandwidth,
    "mc": cmd_mc,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    started = timestamp()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            config = COMMANDS[args.command](args)
    except (CointsubError, np.linalg.LinAlgError) as exc:
        print(f"cointsub {args.command}: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    if args.out is not None:
        _manifest(args, config, started, argv).write(manifest_path(args.out))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
