"""Command-line interface.

Exit codes: 0 success, 1 usage or config error, 2 numeric or validation
error, 3 coverage test failed.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .bounds import (
    ConfidenceSpec,
    MomentProfile,
    VarianceInfo,
    bound_full,
    bound_second_moment_only,
    derive_params,
    plug_in_variance,
)
from .config import ConfigError, CsvFormatError, fmt, load_experiment, load_toml, parse_bound_config, read_csv_matrix
from .estimators import empirical_mean, thresholded_mean
from .harness import QUANTILE_LEVELS, InsufficientTrials, coverage_test, run_campaign

log = logging.getLogger("normthresh")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_COVERAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _moment_pair(text):
    try:
        p, val = text.split("=", 1)
        return float(p), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected P=VALUE, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --- estimate -------------------------------------------------------------


def cmd_estimate(args) -> int:
    x = read_csv_matrix(args.input)
    n, d = x.shape
    conf = ConfidenceSpec(delta=args.delta, mu=args.mu)
    emp = empirical_mean(x)
    notes = []
    if args.plug_in:
        variance = plug_in_variance(x)
        notes.append("exploratory, no coverage guarantee: v and T estimated from the sample")
    else:
        if not args.v > 0:
            raise ValueError(f"v must be positive, got {args.v}")
        T = args.T if args.T is not None else args.v
        variance = VarianceInfo(v=args.v, trace_second_moment=T, T=T)
    params = derive_params(conf, variance, n)
    m_hat = thresholded_mean(x, params.lam)

    bound = None
    if args.plug_in or args.T is not None:
        if args.mean_norm is not None:
            m_norm = args.mean_norm
        else:
            m_norm = float(np.linalg.norm(emp))
            notes.append("mean_norm not supplied; bound uses the norm of the empirical mean (exploratory)")
        moments = MomentProfile(norm_moments={2.0: variance.T + m_norm**2}, mean_norm=m_norm)
        bound = bound_second_moment_only(params, moments).to_dict()
    else:
        notes.append("no bound reported: pass --T (an upper bound on E||X - m||^2) to obtain one")

    report = {
        "n": n,
        "d": d,
        "lambda": params.lam,
        "thresholded_mean": [float(c) for c in m_hat],
        "empirical_mean": [float(c) for c in emp],
        "params": params.to_dict(),
        "bound": bound,
        "notes": notes,
    }
    _emit(_dump(report), args.output)
    return EXIT_OK


# --- bound ----------------------------------------------------------------


def cmd_bound(args) -> int:
    cfg = parse_bound_config(load_toml(args.config)) if args.config else {}
    norm_moments = dict(cfg.get("norm_moments") or {})
    mixed_moments = dict(cfg.get("mixed_moments") or {})
    norm_moments.update(dict(args.norm_moment or []))
    mixed_moments.update(dict(args.mixed_moment or []))

    def pick(name, flag):
        val = flag if flag is not None else cfg.get(name)
        return val

    mu = pick("mu", args.mu)
    delta = pick("delta", args.delta)
    v, T, n = pick("v", args.v), pick("T", args.T), pick("n", args.n)
    mean_norm = pick("mean_norm", args.mean_norm)
    variant = pick("variant", args.variant) or "second_moment_only"
    p_grid = pick("p_grid", args.p_grid)
    pp_grid = pick("pp_grid", args.pp_grid)
    for name, val in (("v", v), ("T", T), ("n", n), ("mean_norm", mean_norm)):
        if val is None:
            raise UsageError(f"missing required parameter {name!r}")
    if variant not in ("full", "second_moment_only"):
        raise UsageError(f"variant must be 'full' or 'second_moment_only', got {variant!r}")

    conf = ConfidenceSpec(delta=0.05 if delta is None else delta, mu=0.25 if mu is None else mu)
    variance = VarianceInfo(v=v, trace_second_moment=T, T=T)
    params = derive_params(conf, variance, int(n))
    # trace <= T, so T + ||m||^2 bounds E||X||^2 when no value is given
    norm_moments.setdefault(2.0, T + mean_norm**2)
    if variant == "full":
        moments = MomentProfile.with_default_mixed(norm_moments, mean_norm, variance, mixed_moments)
        report = bound_full(params, moments, p_grid, pp_grid)
    else:
        moments = MomentProfile(norm_moments=norm_moments, mean_norm=mean_norm, mixed_moments=mixed_moments)
        report = bound_second_moment_only(params, moments)
    _emit(_dump({"bound": report.to_dict(), "params": params.to_dict()}), args.output)
    return EXIT_OK


# --- simulate / compare ---------------------------------------------------


def _quantile_csv(report) -> str:
    lines = ["estimator,quantile,value"]
    for name, qs in report.quantiles.items():
        for q in QUANTILE_LEVELS:
            lines.append(f"{name},{fmt(q)},{fmt(qs[q])}")
    return "\n".join(lines) + "\n"


def _comparison_csv(report) -> str:
    header = ["estimator", "rmse"] + [f"q{q:g}" for q in QUANTILE_LEVELS]
    lines = [",".join(header)]
    for name, qs in report.quantiles.items():
        lines.append(",".join([name, fmt(report.rmse[name])] + [fmt(qs[q]) for q in QUANTILE_LEVELS]))
    return "\n".join(lines) + "\n"


def _write(dirpath, name, text):
    os.makedirs(dirpath, exist_ok=True)
    with open(os.path.join(dirpath, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_simulate(args) -> int:
    spec, options = load_experiment(args.config)
    report = run_campaign(spec)
    payload = report.to_dict()
    status = EXIT_OK
    coverage = None
    if options["check_coverage"]:
        try:
            res = coverage_test(report)
            coverage = {"passed": res.passed, "upper": res.upper, "margin": res.margin, "delta": res.delta}
            if not res.passed:
                status = EXIT_COVERAGE
        except InsufficientTrials as exc:
            log.warning("coverage check skipped: %s", exc)
            coverage = {"skipped": str(exc)}
    payload["coverage"] = coverage
    _write(args.output_dir, "report.json", _dump(payload))
    _write(args.output_dir, "quantiles.csv", _quantile_csv(report))
    log.info("campaign finished in %.2fs", report.timing)
    return status


def cmd_compare(args) -> int:
    spec, _ = load_experiment(args.config)
    report = run_campaign(spec)
    table = _comparison_csv(report)
    _write(args.output_dir, "comparison.csv", table)
    _write(args.output_dir, "report.json", _dump(report.to_dict()))
    sys.stdout.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="normthresh", description="Norm-thresholded mean estimation and deviation bounds.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the mean of a CSV sample")
    p.add_argument("--input", required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--mu", type=float, default=0.25)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--v", type=float, help="known bound on the directional variance")
    g.add_argument("--plug-in", action="store_true", help="estimate v from the sample (no guarantee)")
    p.add_argument("--T", type=float, help="known bound on E||X - m||^2 (enables the bound)")
    p.add_argument("--mean-norm", type=float, help="known bound on ||m||")
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bound", help="evaluate the deviation bound")
    p.add_argument("--config")
    p.add_argument("--mu", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--v", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--mean-norm", type=float)
    p.add_argument("--variant", choices=["full", "second_moment_only"])
    p.add_argument("--norm-moment", type=_moment_pair, action="append", metavar="P=VALUE")
    p.add_argument("--mixed-moment", type=_moment_pair, action="append", metavar="P=VALUE")
    p.add_argument("--p-grid", type=_float_list)
    p.add_argument("--pp-grid", type=_float_list)
    p.add_argument("--output")
    p.set_defaults(func=cmd_bound)

    for name, func, text in (
        ("simulate", cmd_simulate, "run a coverage campaign"),
        ("compare", cmd_compare, "compare estimators on a campaign"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--output-dir", required=True)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CsvFormatError, ValueError, ArithmeticError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
