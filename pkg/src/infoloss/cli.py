"""Command-line front end.

Exit codes: 0 success, 1 check failed, 2 estimator undersampled,
64 bad configuration or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from fractions import Fraction

from . import __version__, dist, experiments, loss

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_UNDERSAMPLED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _ladder(text: str):
    if text == "auto":
        return "auto"
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad resolution ladder {text!r}") from None


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _fraction(text: str) -> float:
    return float(Fraction(text))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="root seed (unsigned 64-bit)")
    common.add_argument("--out", help="write the report here (atomically)")
    common.add_argument("--json", action="store_true", help="also print the report to stdout")
    common.add_argument("--no-meta", action="store_true", help="omit timestamp and version metadata")

    parser = _Parser(prog="infoloss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="closed-form vs. estimated loss of a block")
    p.add_argument("--block", required=True)
    p.add_argument("--spec", required=True, help="preset (stdnormal, gaussN, uniformN, dyadic), JSON, or @file.json")
    p.add_argument("--samples", type=int, default=2 * 10**5)
    p.add_argument("--resolutions", type=_ladder, default="auto")
    p.add_argument("--tol", type=float, default=0.1)
    p.add_argument("--method", choices=["auto", "global", "piecewise"], default="auto")

    p = sub.add_parser("estimate-dim", parents=[common], help="information dimension of a distribution")
    p.add_argument("--spec", required=True)
    p.add_argument("--samples", type=int, default=2 * 10**5)
    p.add_argument("--resolutions", type=_ladder, default="auto")

    p = sub.add_parser("pca-demo", parents=[common], help="one sample-covariance PCA run")
    p.add_argument("--dims", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--center", action="store_true", help="subtract the sample mean first")

    p = sub.add_parser("pca-curve", parents=[common], help="loss of sample PCA against n, as CSV")
    p.add_argument("--dims", type=_int_list, default=[5, 10, 20])
    p.add_argument("--n-list", type=_int_list, default=list(range(1, 41)))

    p = sub.add_parser("cascade", parents=[common], help="compose stage losses in series")
    p.add_argument("losses", nargs="+", type=_fraction, help="stage losses, fractions allowed (1/3)")
    p.add_argument("--discrete", action="store_true", help="stages act on discrete variables")

    sub.add_parser("verify-appendices", parents=[common], help="run the worked-example checks")
    return parser


def _read_spec(text: str) -> dist.DistributionSpec:
    if text.startswith("@"):
        with open(text[1:]) as fh:
            return dist.spec_from_json(fh.read())
    return dist.named_spec(text)


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".infoloss-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, payload, text: str | None = None) -> None:
    if text is None:
        if not args.no_meta:
            payload = dict(payload)
            payload["meta"] = {
                "version": __version__,
                "created": datetime.now(timezone.utc).isoformat(),
                "command": args.command,
                "seed": args.seed,
            }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        write_atomic(args.out, text)
    if args.json or not args.out:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    config = experiments.ExperimentConfig(
        block=args.block,
        spec=_read_spec(args.spec),
        samples=args.samples,
        resolutions=args.resolutions,
        seed=args.seed,
        tolerance=args.tol,
        method=args.method,
    )
    report = experiments.analyze(config)
    _emit(args, report.to_dict())
    if report.undersampled:
        return EXIT_UNDERSAMPLED
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_estimate_dim(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    report = experiments.estimate_dim_report(_read_spec(args.spec), args.samples, args.seed, args.resolutions)
    _emit(args, report)
    return EXIT_UNDERSAMPLED if report["undersampled"] else EXIT_OK


def cmd_pca_demo(args) -> int:
    if args.dims < 1 or args.samples < 1:
        raise UsageError("--dims and --samples must be positive")
    _emit(args, experiments.pca_demo(args.dims, args.samples, args.seed, args.center))
    return EXIT_OK


def cmd_pca_curve(args) -> int:
    rows = []
    for N in args.dims:
        rows.extend(experiments.pca_curve_rows(N, args.n_list))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(args, None, buf.getvalue())
    return EXIT_OK


def cmd_cascade(args) -> int:
    if any(not 0 <= v <= 1 for v in args.losses):
        raise UsageError("stage losses must lie in [0, 1]")
    stages = [loss.LossValue(v) for v in args.losses]
    total = stages[0]
    for stage in stages[1:]:
        total = loss.cascade_compose(total, stage, discrete=args.discrete)
    if len(stages) == 1 and not args.discrete:
        total = loss.LossValue(total.value, loss.Status.CONJECTURED)
    _emit(args, {"stages": [s.value for s in stages], "total": total.to_dict()})
    return EXIT_OK


def cmd_verify_appendices(args) -> int:
    summary = experiments.verify_appendices(args.seed)
    _emit(args, summary)
    if not summary["pass"]:
        print("failed checks: " + ", ".join(summary["failed"]), file=sys.stderr)
    return EXIT_OK if summary["pass"] else EXIT_FAIL


COMMANDS = {
    "analyze": cmd_analyze,
    "estimate-dim": cmd_estimate_dim,
    "pca-demo": cmd_pca_demo,
    "pca-curve": cmd_pca_curve,
    "cascade": cmd_cascade,
    "verify-appendices": cmd_verify_appendices,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"infoloss {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
