"""Command line entry point: ``nvltm {simulate,analyze,report,selftest}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..analysis import fitting, spectral
from ..errors import NVLTMError
from ..signal_synth import TimeTrace
from .config import load_config
from .csvio import export_csv, load_csv
from .scenarios import DISPLAY_UNITS, load_report, run_scenario
from .selftest import run_selftest

OUT_ENV = "NVLTM_OUT"


def _out_dir(args, default):
    return args.out or os.environ.get(OUT_ENV) or default


def cmd_simulate(args) -> int:
    cfg = load_config(args.config).with_overrides(seed=args.seed, workers=args.workers)
    out = _out_dir(args, cfg.out)
    report = run_scenario(cfg, out)
    if not args.quiet:
        print(f"scenario {report.scenario} -> {out}")
        _print_quantities(report)
    return 0


def _column(table, name):
    if name not in table:
        raise NVLTMError(f"input has no column {name!r}; columns: {', '.join(table)}")
    return table[name][1]


def cmd_analyze(args) -> int:
    table = load_csv(args.input)
    out = Path(_out_dir(args, "."))
    out.mkdir(parents=True, exist_ok=True)
    result: dict[str, object] = {"kind": args.kind, "input": str(args.input)}
    if args.kind == "lsd":
        t, v = _column(table, "time"), _column(table, args.column)
        fs = 1.0 / float(np.median(np.diff(t)))
        sd = spectral.lsd(TimeTrace(v, fs, float(t[0])), args.segment)
        export_csv(out / "lsd.csv", [("frequency", "Hz", sd.freqs), ("density", sd.units, sd.values)])
        result.update(n_segments=sd.n_segments, mean_0_500Hz=spectral.band_mean(sd, 0.0, min(500.0, sd.freqs[-1])))
    elif args.kind == "threshold":
        fit = fitting.fit_threshold(_column(table, "current"), _column(table, "power"))
        result.update(params=fit.params, stderr=fit.stderr, units=fit.units)
    elif args.kind == "lorentzian":
        x = _column(table, "frequency")
        y = table[args.column][1] if args.column in table else list(table.values())[1][1]
        fit = fitting.fit_lorentzian(x, y, args.peaks)
        result.update(params=fit.params, stderr=fit.stderr, converged=fit.converged)
    elif args.kind == "lockin_slope":
        x = _column(table, "frequency")
        y = table[args.column][1] if args.column in table else list(table.values())[1][1]
        slope, f0 = fitting.lockin_slope(x, y)
        result.update(slope=slope, zero_crossing=f0)
    (out / f"analysis_{args.kind}.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    if not args.quiet:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def _print_quantities(report) -> None:
    width = max(len(k) for k in report.quantities) if report.quantities else 0
    for name, q in report.quantities.items():
        line = f"  {name:<{width}}  {q.value:.6g} {q.unit}"
        if q.display_unit:
            line += f"  ({q.display_value:.6g} {q.display_unit})"
        print(line)


def cmd_report(args) -> int:
    path = Path(args.report)
    if path.is_dir():
        path = path / "report.json"
    report = load_report(path)
    print(f"scenario: {report.scenario}")
    print(f"config:   {report.config_hash}")
    print(f"seed:     {report.seed}")
    _print_quantities(report)
    print("files:")
    for name, digest in report.files.items():
        print(f"  {name}  {digest[:16]}")
    return 0


def cmd_selftest(args) -> int:
    emit = (lambda s: None) if args.quiet else print
    return 0 if run_selftest(emit) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvltm", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or the config value)")
    common.add_argument("--quiet", action="store_true")

    s = sub.add_parser("simulate", parents=[common], help="run a scenario from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="overrides the config seed")
    s.add_argument("--workers", type=int, help="threads for noise synthesis")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", parents=[common], help="analyze an exported CSV table")
    a.add_argument("--input", required=True)
    a.add_argument("--kind", required=True, choices=("lsd", "threshold", "lorentzian", "lockin_slope"))
    a.add_argument("--column", default="voltage", help="value column for lsd/lorentzian/lockin_slope")
    a.add_argument("--segment", type=float, default=1.0, help="LSD segment length, s")
    a.add_argument("--peaks", type=int, default=1, choices=(1, 2))
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="print a run report")
    r.add_argument("report", help="report.json or the directory holding it")
    r.set_defaults(func=cmd_report)

    t = sub.add_parser("selftest", help="run the numerical oracle checks")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NVLTMError, OSError, ValueError) as exc:
        print(f"nvltm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
