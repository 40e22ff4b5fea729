"""Run every config in configs/acceptance and write outputs under results/<name>/.

Usage: python3 scripts/run_all_acceptance.py [--workers K] [--only NAME ...]
"""
import argparse
import sys
from pathlib import Path

from perturbwalk.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", nargs="*", default=None)
    ap.add_argument("--out", default=str(ROOT / "results"))
    args = ap.parse_args()
    worst = 0
    for cfg in sorted((ROOT / "configs" / "acceptance").glob("*.json")):
        if args.only and cfg.stem not in args.only:
            continue
        print(f"== {cfg.stem}", flush=True)
        code = main(["run", str(cfg), "--out", str(Path(args.out) / cfg.stem), "--workers", str(args.workers)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run())
