#!/usr/bin/env python3
"""Boxplot-style quartiles of the robust residual scale as T grows.

One block per tail index; plot-ready CSV (no figures are rendered).

Usage:
  python scripts/run_sd_growth.py --nus 1.2 3 --N 1000 --out sd_growth.csv
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from marinfer.estimator import MarModel
from marinfer.harness import ErfConfig, run_sd_growth, sd_growth_table_text


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nus", type=float, nargs="+", default=[1.2, 1.5, 1.8, 3.0])
    ap.add_argument("--eta", type=float, default=3.0)
    ap.add_argument("--phi", type=float, default=0.65)
    ap.add_argument("--vphi", type=float, default=0.35)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--T-grid", type=int, nargs="+", default=[100, 200, 500, 1000, 2000, 3000], dest="T_grid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=int(os.environ.get("MARINFER_THREADS", "2")))
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    chunks = []
    for nu in args.nus:
        cfg = ErfConfig(
            model=MarModel(phi=[args.phi], vphi=[args.vphi], nu=nu, eta=args.eta),
            T_grid=tuple(args.T_grid),
            N=args.N,
            seed=args.seed,
            methods=("robust",),
            workers=args.threads,
        )
        chunks.append(f"# nu0={nu:g} phi0={args.phi} vphi0={args.vphi} eta0={args.eta} N={args.N}\n")
        chunks.append(sd_growth_table_text(run_sd_growth(cfg)))
    text = "".join(chunks)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
