"""Run an hbar sweep and render its figures.

    python scripts/sweep.py configs/sweep.json out/sweep
"""
import argparse
import sys
from pathlib import Path

from bdglab.errors import InsufficientData
from bdglab.harness.config import load_config
from bdglab.harness.plot import plot
from bdglab.harness.run import run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("out")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    cfg = load_config(args.config)
    if args.workers:
        cfg.workers = args.workers
    try:
        rep = run_sweep(cfg, args.out)
    except InsufficientData as exc:
        sys.exit(f"insufficient data: {exc}")
    for f in rep["fits"]:
        fit, sub = f["fit"], f["fit_minus_t0"]
        line = f"t = {f['t']:<5g} slope {fit['slope']:.3f} ± {fit['pm']:.3f}"
        if sub and sub["slope"] is not None:
            line += f"   (t0-subtracted {sub['slope']:.3f})"
        print(line)
    for p in plot(Path(args.out) / "report.json", Path(args.out) / "figures"):
        print(p)


if __name__ == "__main__":
    main()
