"""Command-line entry point: ``sibhist {estimate,check,report,sensitivity,simulate}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, sensitivity, simulate
from .data import FrameDefinition, load_dataset, make_cells, write_rows
from .errors import DataError, SibhistError, ZeroExposureError
from .estimators import Estimator, estimate
from .tally import ExposureMode, tally
from .variance import replicate_multipliers, summarize_replicates, write_replicates

EXIT_LOAD = 1
EXIT_EMPTY = 2
EXIT_USAGE = 64

ESTIMATE_COLUMNS = ["cell", "sex", "age_lo", "age_hi", "window_start", "window_end", "estimator",
                    "point", "se", "ci_lo", "ci_hi", "n_reports"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"{text!r}: LO exceeds HI")
    return lo, hi


def _float_range(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B:STEP, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"{text!r}: need STEP > 0 and A <= B")
    return sensitivity.grid(lo, hi, step)


def _width(text: str) -> int:
    t = text.strip().lower().rstrip("y")
    if not t.isdigit() or int(t) < 1:
        raise argparse.ArgumentTypeError(f"expected a band width such as 5y, got {text!r}")
    return int(t)


def _frame(text: str) -> FrameDefinition:
    try:
        return FrameDefinition.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_input(p):
    p.add_argument("--respondents", required=True, type=Path, help="respondents.csv")
    p.add_argument("--siblings", required=True, type=Path, help="siblings.csv")
    p.add_argument("--frame", type=_frame, default=FrameDefinition.parse("f15-49"),
                   help="sampling frame, e.g. f15-49 (females 15-49) or fm15-59 (default f15-49)")


def _add_output(p, default_name):
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    p.add_argument("--out", type=Path, default=None,
                   help=f"output file (default {default_name}.csv or .json in the working directory)")


def _out_path(args, default_name):
    return args.out or Path(f"{default_name}.{args.format}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sibhist", description="Adult death rates from sibling histories.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="death-rate estimates per cell -> estimates.csv")
    _add_input(p)
    win = p.add_mutually_exclusive_group()
    win.add_argument("--window-years", type=int, default=None, metavar="N",
                     help="window of N years before each interview (default 7)")
    win.add_argument("--window", type=_range, default=None, metavar="CMC1:CMC2",
                     help="absolute window in century-month codes")
    p.add_argument("--cells", type=_width, default=5, metavar="5y", help="age band width (default 5y)")
    p.add_argument("--ages", type=_range, default=None, metavar="LO:HI",
                   help="age range covered by the cells (default: frame ages)")
    p.add_argument("--estimators", default="agg_excl,ind_excl",
                   help="comma list of agg_excl, agg_incl, ind_excl, ind_incl, or agg/ind")
    p.add_argument("--include-respondent", action="store_true",
                   help="use the variant of each estimator that counts the respondent")
    p.add_argument("--exposure", choices=["person-years", "headcount"], default="person-years",
                   help="exposure measure (default person-years)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N",
                   help="rescaled-bootstrap replicates for se/ci (0 = none; CI needs >= 200)")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed (default 0)")
    p.add_argument("--allow-empty", action="store_true",
                   help="write blank estimates for cells without exposure instead of failing")
    p.add_argument("--tallies", type=Path, default=None, metavar="PATH", help="also dump tallies.csv")
    p.add_argument("--replicates", type=Path, default=None, metavar="PATH",
                   help="also dump replicate multipliers")
    _add_output(p, "estimates")

    p = sub.add_parser("check", help="internal-consistency statistics by age -> ic_checks.csv")
    _add_input(p)
    p.add_argument("--ages", type=_range, default=None, metavar="LO:HI",
                   help="single-year ages to check (default: frame ages)")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N", help="replicates for CIs (>= 200)")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed (default 0)")
    _add_output(p, "ic_checks")

    p = sub.add_parser("report", help="share of respondents without frame siblings -> invisibility.csv")
    _add_input(p)
    p.add_argument("--cells", type=_width, default=5, metavar="5y", help="age band width (default 5y)")
    p.add_argument("--ages", type=_range, default=None, metavar="LO:HI", help="default: frame ages")
    _add_output(p, "invisibility")

    p = sub.add_parser("sensitivity", help="relative-error surface over K and p -> surface.csv")
    p.add_argument("--k", type=_float_range, required=True, metavar="A:B:STEP",
                   help="grid of invisible/visible death-rate ratios")
    p.add_argument("--p", type=_float_range, required=True, metavar="A:B:STEP",
                   help="grid of invisible shares")
    p.add_argument("--param", choices=["exposure", "deaths"], default="exposure",
                   help="whether p is the invisible share of exposure or of deaths")
    _add_output(p, "surface")

    p = sub.add_parser("simulate", help="run a simulation scenario file")
    p.add_argument("--config", type=Path, required=True, help="scenario.toml")
    p.add_argument("--out", type=Path, default=Path("."),
                   help="output directory for scenario_results and scenario_summary")
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="output format (default csv)")
    return parser


def _load(args):
    return load_dataset(args.respondents, args.siblings, args.frame)


def _estimators(args) -> list[Estimator]:
    out = []
    for token in args.estimators.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token in ("agg", "ind"):
            token = f"{token}_excl"
        est = Estimator.parse(token)
        if args.include_respondent and not est.include_respondent:
            est = Estimator[est.name.replace("EXCL", "INCL")]
        if est not in out:
            out.append(est)
    return out


def cmd_estimate(args) -> int:
    try:
        estimators = _estimators(args)
    except ValueError as exc:
        print(f"sibhist estimate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if 0 < args.bootstrap < 50:
        print("sibhist estimate: --bootstrap needs at least 50 replicates", file=sys.stderr)
        return EXIT_USAGE
    ds = _load(args)
    lo, hi = args.ages or (ds.frame.age_min, ds.frame.age_max)
    if args.window is not None:
        cells = make_cells(lo, hi, args.cells, window=args.window, relative=False)
    else:
        years = 7 if args.window_years is None else args.window_years
        cells = make_cells(lo, hi, args.cells, window=(-12 * years, -1), relative=True)
    mode = ExposureMode.coerce(args.exposure)

    mult = None
    if args.bootstrap:
        mult = replicate_multipliers(ds, args.bootstrap, args.seed)
        if args.replicates:
            write_replicates(args.replicates, ds, mult)

    rows = []
    tables = {}
    for est in estimators:
        tab = tables.get(est.include_respondent)
        if tab is None:
            tab = tables[est.include_respondent] = tally(ds, cells, est.include_respondent, mode)
            if args.tallies and est.include_respondent == estimators[0].include_respondent:
                tab.to_csv(args.tallies)
        try:
            point = estimate(est, tab, allow_empty=args.allow_empty)
        except ZeroExposureError as exc:
            print(f"sibhist estimate: {exc} (ZERO_EXPOSURE); use --allow-empty to continue",
                  file=sys.stderr)
            return EXIT_EMPTY
        reps = None
        if mult is not None:
            reps = estimate(est, tab, weights=tab.weights * mult, allow_empty=True)
        n_reports = tab.y_D.sum(axis=0)
        for c, cell in enumerate(cells):
            se = lo_ci = hi_ci = float("nan")
            if reps is not None and not np.isnan(point[c]):
                try:
                    res = summarize_replicates(reps[:, c])
                    se = res.se
                    if res.ci_lo is not None:
                        lo_ci, hi_ci = res.ci_lo, res.ci_hi
                except ValueError:
                    pass
            rows.append([cell.label, cell.sex, cell.age_lo, cell.age_hi, cell.window_start,
                         cell.window_end, est.name, float(point[c]), se, lo_ci, hi_ci,
                         int(round(n_reports[c]))])
    write_rows(_out_path(args, "estimates"), ESTIMATE_COLUMNS, rows, args.format)
    return 0


def cmd_check(args) -> int:
    ds = _load(args)
    lo, hi = args.ages or (ds.frame.age_min, ds.frame.age_max)
    reps = None
    if args.bootstrap:
        reps = ds.resp.weight * replicate_multipliers(ds, args.bootstrap, args.seed)
    rows = diagnostics.ic_checks(ds, range(lo, hi + 1), reps)
    write_rows(_out_path(args, "ic_checks"), ["age", "delta", "ci_lo", "ci_hi"], rows, args.format)
    return 0


def cmd_report(args) -> int:
    ds = _load(args)
    lo, hi = args.ages or (ds.frame.age_min, ds.frame.age_max)
    bands = [(a, min(a + args.cells - 1, hi)) for a in range(lo, hi + 1, args.cells)]
    frac = diagnostics.invisible_fraction_by_age(ds, bands)
    write_rows(_out_path(args, "invisibility"), ["band", "fraction"],
               ([f"{a}-{b}", frac[(a, b)]] for a, b in bands), args.format)
    return 0


def cmd_sensitivity(args) -> int:
    rows = sensitivity.sensitivity_surface(args.k, args.p, args.param)
    write_rows(_out_path(args, "surface"), ["K", "p", "rel_error"], rows, args.format)
    return 0


def cmd_simulate(args) -> int:
    config = simulate.load_config(args.config)
    results = simulate.run_scenario(config)
    simulate.write_scenario_outputs(results, args.out, args.format)
    return 0


COMMANDS = {"estimate": cmd_estimate, "check": cmd_check, "report": cmd_report,
            "sensitivity": cmd_sensitivity, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"sibhist {args.command}: cannot load input\n{exc}", file=sys.stderr)
        return EXIT_LOAD
    except (OSError, SibhistError) as exc:
        print(f"sibhist {args.command}: {exc}", file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())
