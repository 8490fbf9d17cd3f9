"""Command line front end.

One binary, five subcommands:

    lsi estimate    --measure m.json --delta 1.0        bracket for one measure
    lsi scan        --measure m.json --deltas 0.1,0.05  blow-up scan over deltas
    lsi rmt         --config c.json [--threads N]       concentration experiment
    lsi bakry       --measure cloud.json --delta 4.4    curvature certificate
    lsi asymptotics --measure m.json --delta 1 --xs -50,-100  tail quotients

Exit codes: 0 success, 1 I/O failure, 2 validation failure.  Output files
are written to a temporary sibling and renamed, so a nonzero exit never
leaves a partial file.  Identical invocations produce byte-identical
output; `--threads` never changes results, only wall time.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import bg, highdim, mollify, rmt
from .errors import ValidationError
from .measure import build_measure

_FLOAT_FMT = "{:.17g}"


def _fmt(v: float) -> str:
    return _FLOAT_FMT.format(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsi")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="json"):
        p.add_argument("--out", type=str, default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=fmt_default)

    p = sub.add_parser("estimate", help="log-Sobolev bracket for a mollified measure")
    p.add_argument("--measure", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    common(p)

    p = sub.add_parser("scan", help="blow-up scan over a decreasing delta grid")
    p.add_argument("--measure", required=True)
    p.add_argument("--deltas", required=True, help="comma separated, decreasing")
    p.add_argument("--tol", type=float, default=1e-12)
    common(p, fmt_default="csv")

    p = sub.add_parser("rmt", help="random-matrix concentration experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("LSI_LAB_THREADS", "1")))
    common(p)

    p = sub.add_parser("bakry", help="probe-based curvature certificate")
    p.add_argument("--measure", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--grid", type=int, default=7, help="grid points per axis")
    p.add_argument("--random", type=int, default=200, help="random probe count")
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("asymptotics", help="tail quotients on an x grid")
    p.add_argument("--measure", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--xs", required=True,
                   help="comma separated probe points (use --xs=-50,-100 for negatives)")
    p.add_argument("--side", choices=("left", "right"), required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    common(p)

    return parser


def _read_json(path: str):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse float list {text!r}") from exc


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _cmd_estimate(args) -> str:
    measure = build_measure(_read_json(args.measure))
    density = mollify.MollifiedDensity(measure, args.delta, quadrature_tol=args.tol)
    report = bg.compute_bg(density)
    if args.format == "csv":
        return bg.BGReport.CSV_HEADER + "\n" + report.to_csv_row() + "\n"
    return _dump_json(report.to_dict())


def _cmd_scan(args) -> str:
    measure = build_measure(_read_json(args.measure))
    deltas = _parse_floats(args.deltas)
    if len(deltas) < 2:
        raise ValidationError("need >= 2 deltas for slope")
    scan = bg.blowup_scan(measure, deltas)
    if args.format == "json":
        return _dump_json(scan.to_dict())
    lines = [bg.BGReport.CSV_HEADER]
    lines.extend(r.to_csv_row() for r in scan.reports)
    lines.append(
        f"# slope={_fmt(scan.fitted_slope_vs_inv_delta)}"
        f" theoretical_exponent={_fmt(scan.theoretical_exponent)}"
        f" gap={_fmt(scan.gap[0])},{_fmt(scan.gap[1])}"
    )
    return "\n".join(lines) + "\n"


def _cmd_rmt(args) -> str:
    if args.threads < 1:
        raise ValidationError("--threads must be >= 1")
    config = rmt.config_from_dict(_read_json(args.config))
    report = rmt.concentration_experiment(config, workers=args.threads)
    if args.format == "csv":
        return report.to_csv()
    return _dump_json(report.to_dict())


def _cmd_bakry(args) -> str:
    cloud = highdim.measure_nd_from_dict(_read_json(args.measure))
    spec = highdim.ProbeSpec(grid_points_per_axis=args.grid,
                             random_points=args.random, seed=args.seed)
    cert = highdim.bakry_emery_certificate(cloud, args.delta, spec)
    if args.format == "csv":
        d = cert.to_dict()
        keys = ["delta", "R", "n", "min_eig", "c_candidate", "threshold_ok",
                "perturbation_bound", "probes_evaluated"]
        row = ",".join("" if d[k] is None else
                       (_fmt(d[k]) if isinstance(d[k], float) else str(d[k]))
                       for k in keys)
        return ",".join(keys) + "\n" + row + "\n"
    return _dump_json(cert.to_dict())


def _cmd_asymptotics(args) -> str:
    measure = build_measure(_read_json(args.measure))
    density = mollify.MollifiedDensity(measure, args.delta, quadrature_tol=args.tol)
    xs = _parse_floats(args.xs)
    if not xs:
        raise ValidationError("need at least one probe point")
    reports = [mollify.asymptotic_ratios(density, x, args.side) for x in xs]
    if args.format == "csv":
        lines = ["x,ratio_lemma1,ratio_lemma2,ratio_lemma3,side"]
        lines.extend(
            f"{_fmt(r.x)},{_fmt(r.ratio_lemma1)},{_fmt(r.ratio_lemma2)},"
            f"{_fmt(r.ratio_lemma3)},{r.side}"
            for r in reports
        )
        return "\n".join(lines) + "\n"
    return _dump_json([{
        "x": r.x,
        "ratio_lemma1": r.ratio_lemma1,
        "ratio_lemma2": r.ratio_lemma2,
        "ratio_lemma3": r.ratio_lemma3,
        "side": r.side,
    } for r in reports])


_COMMANDS = {
    "estimate": _cmd_estimate,
    "scan": _cmd_scan,
    "rmt": _cmd_rmt,
    "bakry": _cmd_bakry,
    "asymptotics": _cmd_asymptotics,
}


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    target = Path(out)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent) or ".",
                               prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = _COMMANDS[args.command](args)
        _emit(text, args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def run() -> None:
    raise SystemExit(main())
