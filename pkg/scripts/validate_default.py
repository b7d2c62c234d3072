"""Conservation and a-priori bound table over the full horizon of a config.

The CLI validate command stops at t = 0.5; this script runs to cfg.T.

    python scripts/validate_default.py configs/validate.json
"""
import argparse
import sys

from bdglab.harness.checks import BOUND_ROWS, BOUND_SLACK
from bdglab.harness.config import load_config
from bdglab.harness.run import validate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = load_config(args.config)
    rows = validate(cfg, args.out, T=cfg.T)
    ok = True
    for r in rows:
        need = BOUND_SLACK if r["name"] in BOUND_ROWS else 0.0
        good = r["passed"] and r["margin"] >= need
        ok &= good
        print(f"{r['name']:<28} {r['lhs']:>11.4e} {r['rhs']:>11.4e} {r['margin']:+8.3f}  "
              f"{'ok' if good else 'FAIL'}")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
