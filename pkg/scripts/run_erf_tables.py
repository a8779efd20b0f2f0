#!/usr/bin/env python3
"""Desk-scale rejection-frequency tables for the three SE constructions.

Reproduces the layout of the simulation tables: one block per DGP, rows by
sample size, columns by method.  Defaults are desk scale (N=1000, T up to
1000); pass --full-grid for the published grid up to T=3000.

Usage:
  python scripts/run_erf_tables.py --nu 3 --out erf_nu3.csv --threads 2
  python scripts/run_erf_tables.py --nu 1.8 --phi 0 --vphi 0 --N 1000
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from marinfer.estimator import MarModel
from marinfer.harness import ErfConfig, erf_table_text, run_erf


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nu", type=float, default=3.0)
    ap.add_argument("--eta", type=float, default=3.0)
    ap.add_argument("--phi", type=float, default=0.65)
    ap.add_argument("--vphi", type=float, default=0.35)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--T-grid", type=int, nargs="+", default=[100, 200, 500, 1000], dest="T_grid")
    ap.add_argument("--full-grid", action="store_true", help="use T = 100 ... 3000")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=int(os.environ.get("MARINFER_THREADS", "2")))
    ap.add_argument("--kstar-source", default="auto", choices=("auto", "reference", "calibrate"))
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    grid = (100, 200, 500, 1000, 2000, 3000) if args.full_grid else tuple(args.T_grid)
    cfg = ErfConfig(
        model=MarModel(phi=[args.phi], vphi=[args.vphi], nu=args.nu, eta=args.eta),
        T_grid=grid,
        N=args.N,
        seed=args.seed,
        methods=("classic", "block_hessian", "robust"),
        kstar_source=args.kstar_source,
        workers=args.threads,
    )
    text = (
        f"# erf table: phi0={args.phi} vphi0={args.vphi} nu0={args.nu} eta0={args.eta} "
        f"N={args.N} seed={args.seed}\n" + erf_table_text(run_erf(cfg))
    )
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
