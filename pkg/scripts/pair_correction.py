"""Pair-term toggle: 1/N scaling of the classical difference, then the quantum comparison.

    python scripts/pair_correction.py configs/pair.json
"""
import argparse
import json

from bdglab.harness.config import load_config
from bdglab.harness.experiments import classical_pair_difference, pair_tracking


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--N", type=float, nargs="+", default=[1e3, 1e4])
    args = ap.parse_args()
    cfg = load_config(args.config)
    diff = classical_pair_difference(cfg, Ns=args.N)
    print(json.dumps(diff, indent=2))
    try:
        print(json.dumps(pair_tracking(cfg, args.N[0]), indent=2))
    except Exception as exc:
        print(f"quantum comparison at N = {args.N[0]:g} failed: {type(exc).__name__}: {exc}")


if __name__ == "__main__":
    main()
