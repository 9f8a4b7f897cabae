"""Command-line entry point: ``cmlm {estimate,infer,regress,plotdata,synth}``.

Exit codes: 0 success, 1 usage, 2 data, 3 numeric.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from cmlm import pipeline
from cmlm.errors import CmlmError, UnknownGrouping, UsageError
from cmlm.ingest import (
    load_asset_returns,
    load_factors,
    load_household_profiles,
    load_inference_rows,
    load_positions,
    load_vix,
    monthly_last,
    write_inference_rows,
)
from cmlm.panel import format_table, result_rows
from cmlm.synth import SynthConfig, write_synthetic

log = logging.getLogger("cmlm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _rf_source(text: str):
    if text == "factors":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'factors' or a number") from None


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_estimate(args) -> int:
    factors = load_factors(args.factors)
    returns = load_asset_returns(args.returns)
    snaps = pipeline.estimate_snapshots(factors, returns, args.window)
    if not snaps:
        log.warning("no month has %d periods of factor history", args.window)
    pipeline.write_snapshots(args.out, snaps)
    for s in snaps:
        if s.excluded:
            log.info("%s: excluded %s", s.month, ", ".join(s.excluded))
    print(f"wrote {len(snaps)} monthly snapshots to {args.out}")
    return 0


def cmd_infer(args) -> int:
    snaps = pipeline.read_snapshots(args.moments)
    positions = load_positions(args.positions)
    rows = pipeline.infer_profiles(snaps, positions, rf=args.rf_source)
    write_inference_rows(args.out, rows)
    sys.stdout.write(pipeline.summarize(rows))
    return 0


def _household_inputs(args):
    profiles = accounts = None
    if args.demographics:
        profiles = {p.household_id: p for p in load_household_profiles(args.demographics)}
    if args.positions:
        accounts = pipeline.account_index(load_positions(args.positions))
    return profiles, accounts


def cmd_regress(args) -> int:
    model = pipeline.get_model(args.model)
    rows = load_inference_rows(args.profiles)
    profiles, accounts = _household_inputs(args)
    vix = monthly_last(load_vix(args.vix)) if args.vix else None
    run = pipeline.run_regression(args.model, rows, profiles, accounts, vix)
    table = format_table(run.result, title=f"{args.model}: {model.title}", response=model.response)
    out = Path(args.out)
    txt, csv_path = out.with_suffix(".txt"), out.with_suffix(".csv")
    txt.parent.mkdir(parents=True, exist_ok=True)
    txt.write_text(table, encoding="utf-8")
    _write_csv(csv_path, ("term", "estimate", "std_error", "p_value", "stars"), result_rows(run.result))
    sys.stdout.write(table)
    return 0


def cmd_plotdata(args) -> int:
    rows = load_inference_rows(args.profiles)
    out = Path(args.out)
    if args.by in pipeline.SCATTER_BY:
        pts = pipeline.scatter_data(rows, args.by, args.value)
        _write_csv(out, ("x", args.value), pts)
        if args.svg:
            Path(args.svg).write_text(pipeline.scatter_svg(pts, args.by, args.value), encoding="utf-8")
        print(f"wrote {len(pts)} points to {out}")
        return 0
    if args.by not in pipeline.CATEGORICAL_BY:
        raise UnknownGrouping(f"unknown grouping {args.by!r}")
    profiles, accounts = _household_inputs(args)
    if profiles is None or accounts is None:
        raise UsageError(f"--by {args.by} needs --demographics and --positions")
    hist = pipeline.histogram_data(rows, args.by, profiles, accounts, args.value)
    _write_csv(out, ("group", "bin_lo", "bin_hi", "count"), hist)
    if args.svg:
        Path(args.svg).write_text(
            pipeline.histogram_svg(hist, f"{args.value} by {args.by}"), encoding="utf-8"
        )
    print(f"wrote {len(hist)} histogram bins to {out}")
    return 0


def cmd_synth(args) -> int:
    config = SynthConfig.from_file(args.config) if args.config else SynthConfig()
    paths = write_synthetic(config, args.out)
    for name, p in paths.items():
        print(f"{name}: {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cmlm", description="Capital market line risk profiling pipeline.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", help="five-factor moment snapshots per month")
    e.add_argument("--factors", required=True)
    e.add_argument("--returns", required=True)
    e.add_argument("--window", required=True, type=_positive_int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    i = sub.add_parser("infer", help="implied risk aversion and efficiency per account-month")
    i.add_argument("--moments", required=True)
    i.add_argument("--positions", required=True)
    i.add_argument("--rf-source", default="factors", type=_rf_source,
                   help="'factors' (window mean of the factor file rf) or a fixed rate")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)

    r = sub.add_parser("regress", help="panel regression from the model registry")
    r.add_argument("--profiles", required=True, help="output of 'cmlm infer'")
    r.add_argument("--demographics")
    r.add_argument("--positions", help="account to household mapping and holdings counts")
    r.add_argument("--vix")
    r.add_argument("--model", required=True)
    r.add_argument("--out", required=True, help="writes <out>.txt and <out>.csv")
    r.set_defaults(func=cmd_regress)

    g = sub.add_parser("plotdata", help="histogram or scatter data for plotting")
    g.add_argument("--profiles", required=True)
    g.add_argument("--by", required=True)
    g.add_argument("--value", choices=("theta", "efficiency"), default="theta")
    g.add_argument("--demographics")
    g.add_argument("--positions")
    g.add_argument("--out", required=True)
    g.add_argument("--svg")
    g.set_defaults(func=cmd_plotdata)

    s = sub.add_parser("synth", help="write a seeded synthetic dataset")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CmlmError as exc:
        print(f"cmlm {args.command}: {exc.status()}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
