"""Command-line entry points: fsi-plot and fsi-report.

Both commands read a run directory and write their output elsewhere
(defaults under the current directory), printing a small JSON record on
stdout. Exit codes: 0 success, 2 schema or parse error, 3 unusable or
empty input directory.
"""

from __future__ import annotations

import argparse
import json
import sys

from .io import ReportError, SchemaError, load_bundle
from .plots import KINDS, plot_series
from .report import render_report

__all__ = ["plot_main", "report_main"]


def _fail(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)


def plot_main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="fsi-plot", description="render figures from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--kinds", nargs="+", choices=KINDS, default=list(KINDS),
                   help="figure kinds to render (default: all applicable)")
    p.add_argument("--out-dir", default="figures",
                   help="where the images go (never the input directory)")
    args = p.parse_args(argv)

    try:
        bundle = load_bundle(args.run_dir, strict=True)
        figures = []
        for kind in args.kinds:
            figures.extend(str(q) for q in
                           plot_series(bundle, kind, args.out_dir))
    except SchemaError as exc:
        _fail("SchemaError", exc)
        return 2
    except (ReportError, ValueError) as exc:
        _fail("ReportError", exc)
        return 3
    print(json.dumps({"command": "plot", "run_dir": args.run_dir,
                      "figures": figures}, indent=2, sort_keys=True))
    return 0


def report_main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="fsi-report",
        description="render a standalone HTML report for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", default="report.html",
                   help="report path (never inside the input directory)")
    args = p.parse_args(argv)

    try:
        out = render_report(args.run_dir, args.out)
    except SchemaError as exc:
        _fail("SchemaError", exc)
        return 2
    except ReportError as exc:
        _fail("ReportError", exc)
        return 3
    print(json.dumps({"command": "report", "run_dir": args.run_dir,
                      "report": str(out)}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(plot_main())
