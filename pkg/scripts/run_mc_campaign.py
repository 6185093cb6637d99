#!/usr/bin/env python3
"""Run a batch of Monte Carlo campaigns over a correlation grid and append
one CSV log line per run.

Starts from a key=value config file (see all_null_gbh1.cfg next to this
script), sweeps --rhos across it, and reports the empirical FDR next to the
closed-form ceiling wherever that ceiling applies.

Usage:
    python scripts/run_mc_campaign.py --config scripts/all_null_gbh1.cfg \
        --rhos 0.05,0.1,0.2 --log campaign_log.csv
"""

import argparse
import sys

from gbh_fdr.simulator import (SimConfig, append_log, config_with_updates,
                               load_config_file, run_mc)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None, help="key=value base config")
    ap.add_argument("--rhos", default="0.05,0.1,0.15,0.2",
                    help="comma-separated correlation values to sweep")
    ap.add_argument("--procedure", default=None,
                    choices=("gbh1", "storey", "bh"))
    ap.add_argument("--replications", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--log", default=None, help="append CSV summaries here")
    args = ap.parse_args(argv)

    base = SimConfig()
    if args.config is not None:
        base = config_with_updates(base, load_config_file(args.config))
    overrides = {k: v for k, v in (("procedure", args.procedure),
                                   ("replications", args.replications),
                                   ("seed", args.seed)) if v is not None}
    base = config_with_updates(base, overrides)

    rhos = [float(v) for v in args.rhos.split(",") if v.strip()]
    for rho in rhos:
        config = config_with_updates(base, {"rho": rho})
        summary = run_mc(config, threads=args.threads)
        ceiling = ("none (outside the guarantee domain)"
                   if summary.bound_value is None
                   else f"{summary.bound_value:.6f}")
        print(f"{config.procedure} rho={rho:<6g} "
              f"fdr={summary.fdr_hat:.6f} (se {summary.fdr_se:.6f}) "
              f"ceiling={ceiling}")
        if args.log is not None:
            append_log(summary, args.log)
    if args.log is not None:
        print(f"appended {len(rhos)} rows to {args.log}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
