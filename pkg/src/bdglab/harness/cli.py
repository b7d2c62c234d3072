"""Command line entry point: run, sweep, validate, plot."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from ..errors import BdgLabError, InsufficientData, ReportParseError
from .config import load_config
from .plot import plot
from .run import VERSION, run_single, run_sweep, validate

log = logging.getLogger("bdglab")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdglab", description="BdG / Vlasov semiclassical laboratory")
    p.add_argument("--version", action="version", version=VERSION)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)
    for name, text in (("run", "single run at the first hbar of the config"),
                       ("sweep", "all hbar cells plus slope fits"),
                       ("validate", "table of checked inequalities")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True)
    s = sub.add_parser("plot", help="SVG figures from a sweep report")
    s.add_argument("--report", required=True)
    s.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        if args.cmd == "plot":
            for path in plot(args.report, args.out):
                print(path)
            return 0
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            cfg = load_config(args.config)
        if args.cmd == "run":
            if len(cfg.hbar) > 1:
                log.warning("run uses the first of %d hbar values", len(cfg.hbar))
            res = run_single(cfg, cfg.hbar[0], args.out)
            for s in res.samples:
                print(f"t = {s['t']:g}  W2^2 = {s['w2sq_one_particle']:.4e}  "
                      f"H^-1^2 = {s['metric_two_particle']:.4e}  total = {s['total']:.4e}")
            return 0
        if args.cmd == "sweep":
            rep = run_sweep(cfg, args.out)
            for c in rep["cells"]:
                if not c["ok"]:
                    print(f"hbar = {c['hbar']:.4g} failed: {c['error']['type']}: {c['error']['message']}")
            for f in rep["fits"]:
                fit = f["fit"]
                if fit["slope"] is not None:
                    print(f"t = {f['t']:g}  slope = {fit['slope']:.3f} ± {fit['pm']:.3f}  "
                          f"(95% [{fit['ci95'][0]:.3f}, {fit['ci95'][1]:.3f}], n = {fit['n']})")
            return 0
        rows = validate(cfg, args.out)
        width = max(len(r["name"]) for r in rows)
        for r in rows:
            print(f"{r['name']:<{width}}  lhs = {r['lhs']:.4e}  rhs = {r['rhs']:.4e}  "
                  f"margin = {r['margin']:+.3f}  {'pass' if r['passed'] else 'FAIL'}")
        return 0 if all(r["passed"] for r in rows) else 1
    except InsufficientData as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return 3
    except ReportParseError as exc:
        print(f"cannot parse report: {exc}", file=sys.stderr)
        return 2
    except (BdgLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
