"""Exact P{tau_0 > n} for the planar simple or lazy walk, with the constant-identification report.

Usage: python3 scripts/return_tail_report.py [--lazy] [--nmax N] [--csv FILE]
"""
import argparse

import numpy as np

from perturbwalk import oracle
from perturbwalk.lattice import CovarianceMatrix


def run():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lazy", action="store_true", help="lazy walk with holding probability 1/2")
    ap.add_argument("--nmax", type=int, default=100_000)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    if args.lazy:
        u, cov = oracle.lazy_srw2_return_probs(args.nmax), CovarianceMatrix(np.diag([0.25, 0.25]))
    else:
        u, cov = oracle.srw2_return_probs(args.nmax), CovarianceMatrix(np.diag([0.5, 0.5]))
    table = oracle.return_tail_exact(u)
    print(f"period c = {table.period}, renewal residual {oracle.renewal_residual(table.U, table.R):.3g}")
    rep = oracle.return_tail_constant_report(table, cov)
    for n, v in zip(rep.decade_points, rep.scaled_at_decades):
        print(f"  n = {n:>8d}  R_n log n = {v:.6f}")
    print(f"  per-decade change: {[round(c, 4) for c in rep.per_decade_change]}")
    print(f"  fitted K = {rep.fitted_constant:.5f}; candidates {rep.candidates}; closest: {rep.supported}")
    print(f"  {rep.notes}")
    llt = oracle.llt_constant_report(table.U, cov, table.period)
    print(f"local limit: n U_cn at n = {llt.n[-1]}: {llt.scaled[-1]:.6f}; candidates {llt.candidates}; "
          f"closest: {llt.supported}")
    if args.csv:
        table.to_csv(args.csv)


if __name__ == "__main__":
    run()
