#!/usr/bin/env python3
"""Export the bound-to-target ratio surface as CSV, one curve per threshold
setting, plus a short console digest of where each curve crosses 10x and 20x.

Usage:
    python scripts/export_figure_curves.py --out curves.csv
    python scripts/export_figure_curves.py --out fine.csv --rho-step 0.001
"""

import argparse
import sys

from gbh_fdr import BoundInput, bound_curve, fdr_bound, rho_max


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="CSV destination")
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--rho-step", type=float, default=0.005)
    args = ap.parse_args(argv)

    lams = [round(0.05 * k, 2) for k in range(1, 11)]
    cap = rho_max()
    n = int(cap / args.rho_step)
    rhos = [round(args.rho_step * k, 12) for k in range(1, n + 1)
            if args.rho_step * k < cap]
    rows = bound_curve(lams, rhos, alpha=args.alpha)

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("lambda,rho,bound,ratio\n")
        for lam, rho, total, ratio in rows:
            fh.write(f"{lam!r},{rho!r},{total!r},{ratio!r}\n")
    print(f"wrote {len(rows)} rows to {args.out} "
          f"({len(lams)} curves, rho < {cap:.6f})")

    for lam in lams:
        crossings = {}
        for level in (10.0, 20.0):
            hit = next((rho for rho in rhos
                        if fdr_bound(BoundInput(lam=lam, rho=rho,
                                                alpha=args.alpha)).total
                        / args.alpha >= level), None)
            crossings[level] = "never" if hit is None else f"rho={hit:g}"
        print(f"  lambda={lam:4}  ratio>=10 at {crossings[10.0]:<12}"
              f" ratio>=20 at {crossings[20.0]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
