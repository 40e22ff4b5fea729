"""Tabulate the exact first-term lower bound for log-log kicks against its limit.

Usage: python3 scripts/counterexample_reference.py [--a A]
"""
import argparse
import math

from perturbwalk import oracle
from perturbwalk.errors import DomainError


def run():
    ap = argparse.ArgumentParser()
    ap.add_argument("--a", type=float, default=1.0)
    args = ap.parse_args()
    limit = oracle.counterexample_limit(args.a)
    print(f"a = {args.a}: limit (1 - exp(-2a)) / 2 = {limit:.6f}")
    print(f"{'log10 n':>8}  {'first term':>12}  {'gap':>10}")
    for e in (4, 5, 6, 8, 10, 20, 50, 100, 1000, 10 ** 5):
        try:
            v = oracle.counterexample_first_term_log(args.a, e * math.log(10))
        except DomainError:
            print(f"{e:>8}  {'n/a':>12}")
            continue
        print(f"{e:>8}  {v:12.6f}  {v - limit:10.2e}")


if __name__ == "__main__":
    run()
