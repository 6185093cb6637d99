"""Command-line front end.

Subcommands: bound, curve, simulate, adjust, verify.  Exit codes:
0 success, 1 an asserted verification failed, 2 bad input or out-of-domain
arguments, 3 I/O failure.  All numeric output uses shortest round-trip
decimals (Python repr) and fixed key/column order, so identical invocations
produce byte-identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .bound import (BoundInput, DomainError, fdr_bound, fdr_bound_aform,
                    in_theorem_domain, rho_max)
from .procedures import GroupedPValues, bh_step_up, gbh1, storey
from .simulator import (DEFAULTS_SOURCE, ConfigError, SimConfig, append_log,
                        config_with_updates, load_config_file, run_mc,
                        summary_json_dict)
from . import verify as verify_mod

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_INPUT = 2
EXIT_IO = 3


def _grid(spec: str) -> list:
    """Parse '0.05:0.5:0.05' (inclusive range) or '0.1,0.2,0.3'."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec {spec!r} must be start:stop:step or comma list")
        start, stop, step = (float(v) for v in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"grid spec {spec!r} has an empty range")
        n = int(round((stop - start) / step))
        vals = [round(start + i * step, 12) for i in range(n + 1)]
        return [v for v in vals if v <= stop + 1e-12]
    return [float(v) for v in spec.split(",") if v.strip() != ""]


def _jdump(obj) -> str:
    return json.dumps(obj)


def _breakdown_dict(bd) -> dict:
    return {"terms": list(bd.terms), "total": bd.total}


def cmd_bound(args) -> int:
    inp = BoundInput(lam=args.lam, rho=args.rho, alpha=args.alpha)
    bd = fdr_bound(inp, allow_out_of_domain=args.force)
    out = {
        "lambda": args.lam,
        "rho": args.rho,
        "alpha": args.alpha,
        "in_theorem_domain": in_theorem_domain(args.lam, args.rho, args.alpha),
        "rho_form": _breakdown_dict(bd),
        "ratio": bd.total / args.alpha,
    }
    if args.aform:
        out["a_form"] = _breakdown_dict(fdr_bound_aform(inp, allow_out_of_domain=args.force))
    print(_jdump(out))
    return EXIT_OK


def cmd_curve(args) -> int:
    lams = _grid(args.lambdas)
    rhos = _grid(args.rhos)
    cap = rho_max()
    bad = [r for r in rhos if not (0.0 < r < cap)]
    if bad:
        raise DomainError("rho", "rho grid outside (0, %.6f): %s" % (cap, ", ".join(repr(r) for r in bad)))
    lines = ["lambda,rho,bound,ratio"]
    for lam in lams:
        for rho in sorted(rhos):
            bd = fdr_bound(BoundInput(lam=lam, rho=rho, alpha=args.alpha))
            lines.append(f"{lam!r},{rho!r},{bd.total!r},{bd.total / args.alpha!r}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} rows to {args.out}")
    return EXIT_OK


def _simulate_updates(args) -> dict:
    updates = {}
    if args.m is not None:
        updates["m"] = args.m
    if args.group_sizes is not None:
        updates["group_sizes"] = tuple(int(v) for v in args.group_sizes.split(","))
    if args.nonnull_counts is not None:
        updates["nonnull_counts"] = tuple(int(v) for v in args.nonnull_counts.split(","))
    if args.effect_mu is not None:
        parts = args.effect_mu.split(",")
        updates["effect_mu"] = float(parts[0]) if len(parts) == 1 \
            else tuple(float(v) for v in parts)
    if args.rho is not None:
        updates["rho"] = args.rho
    if args.lam is not None:
        updates["lam"] = args.lam
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.procedure is not None:
        updates["procedure"] = args.procedure
    if args.replications is not None:
        updates["replications"] = args.replications
    if args.seed is not None:
        updates["seed"] = args.seed
    return updates


def cmd_simulate(args) -> int:
    config = SimConfig()
    source = DEFAULTS_SOURCE
    if args.config is not None:
        config = config_with_updates(config, load_config_file(args.config))
        source = str(args.config)
    config = config_with_updates(config, _simulate_updates(args))
    summary = run_mc(config, threads=args.threads)
    print(_jdump(summary_json_dict(summary, config_source=source)))
    if args.log is not None:
        append_log(summary, args.log)
    return EXIT_OK


def _read_pvalue_table(path, need_group: bool) -> tuple:
    """(header, rows, pvalues, labels) from a CSV with a pvalue column and,
    when needed, a group column.  Errors carry 1-based line numbers."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError:
        raise
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}:1: empty input")
        cols = [h.strip() for h in header]
        if "pvalue" not in cols:
            raise ValueError(f"{path}:1: missing required column 'pvalue'")
        if need_group and "group" not in cols:
            raise ValueError(f"{path}:1: the grouped procedure needs a 'group' column")
        p_idx = cols.index("pvalue")
        g_idx = cols.index("group") if "group" in cols else None
        rows, pvals, labels = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise ValueError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(row)}")
            try:
                p = float(row[p_idx])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad pvalue {row[p_idx]!r}")
            if math.isnan(p) or not (0.0 <= p <= 1.0):
                raise ValueError(f"{path}:{lineno}: pvalue {p} outside [0, 1]")
            pvals.append(p)
            labels.append(row[g_idx].strip() if g_idx is not None else "all")
            rows.append(row)
        if not rows:
            raise ValueError(f"{path}: no data rows")
    return cols, rows, pvals, labels


def cmd_adjust(args) -> int:
    need_group = args.procedure == "gbh1"
    cols, rows, pvals, labels = _read_pvalue_table(args.input, need_group)
    p = np.asarray(pvals)
    if args.procedure == "gbh1":
        gp = GroupedPValues.from_labels(p, labels)
        res = gbh1(gp, args.lam, args.alpha)
    elif args.procedure == "storey":
        res = storey(p, args.lam, args.alpha)
    else:
        res = bh_step_up(p, args.alpha)
    rejected = set(res.rejected)
    keep = [i for i, c in enumerate(cols) if c not in ("weighted_pvalue", "rejected")]
    out_cols = [cols[i] for i in keep] + ["weighted_pvalue", "rejected"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(out_cols)
    for i, row in enumerate(rows):
        writer.writerow([row[j] for j in keep]
                        + [repr(float(res.weighted_pvalues[i])),
                           "true" if i in rejected else "false"])
    text = buf.getvalue()
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


_SECTION_RUNNERS = {
    "integrals": lambda args: [verify_mod.run_integrals_section()],
    "m_bound": lambda args: [verify_mod.run_m_bound_section()],
    "mvt": lambda args: [verify_mod.run_mvt_section()],
    "lemmas": lambda args: [verify_mod.run_lemmas_section(seed=args.seed,
                                                          replications=args.reps)],
}


def cmd_verify(args) -> int:
    sections = list(_SECTION_RUNNERS) if args.section == "all" else [args.section]
    results = []
    for name in sections:
        results.extend(_SECTION_RUNNERS[name](args))
    payload = []
    any_fail = False
    for sec in results:
        for rep in sec.reports:
            payload.append({
                "section": rep.section,
                "grid": [list(g) for g in rep.grid],
                "observed": rep.observed,
                "claimed": rep.claimed,
                "max_violation": rep.max_violation,
                "stderr": rep.stderr,
                "notes": rep.notes,
            })
            flag = " (VIOLATIONS REPORTED)" if rep.max_violation > 0 else ""
            print(f"section {rep.section}: {len(rep.grid)} points, "
                  f"max violation {rep.max_violation!r}{flag}")
        if not sec.asserted_pass:
            any_fail = True
            for msg in sec.failures:
                print(f"ASSERTED FAILURE: {msg}", file=sys.stderr)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(_jdump(payload) + "\n")
    return EXIT_VERIFY_FAIL if any_fail else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gbh-fdr",
                                 description="grouped adaptive multiple testing, its "
                                             "closed-form FDR bound, and audits")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="evaluate the FDR bound at one point")
    b.add_argument("--lambda", dest="lam", type=float, required=True)
    b.add_argument("--rho", type=float, required=True)
    b.add_argument("--alpha", type=float, required=True)
    b.add_argument("--aform", action="store_true",
                   help="also print the a-parameterized evaluation")
    b.add_argument("--force", action="store_true",
                   help="allow lambda in (1/2, 1) outside the guarantee domain")
    b.set_defaults(fn=cmd_bound)

    c = sub.add_parser("curve", help="export bound curves over a (lambda, rho) grid as CSV")
    c.add_argument("--lambdas", default="0.05:0.5:0.05",
                   help="comma list or start:stop:step (default the 10 standard levels)")
    c.add_argument("--rhos", default="0.005:0.335:0.005",
                   help="comma list or start:stop:step (default 0.005..0.335)")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_curve)

    s = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    s.add_argument("--config", default=None, help="flat key=value config file")
    s.add_argument("--m", type=int, default=None)
    s.add_argument("--group-sizes", default=None)
    s.add_argument("--nonnull-counts", default=None)
    s.add_argument("--effect-mu", default=None)
    s.add_argument("--rho", type=float, default=None)
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--procedure", choices=("gbh1", "storey", "bh"), default=None)
    s.add_argument("--replications", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--log", default=None, help="append a CSV summary line to this file")
    s.set_defaults(fn=cmd_simulate)

    a = sub.add_parser("adjust", help="weight and test a CSV of p-values")
    a.add_argument("--input", required=True, help="CSV with a pvalue column "
                                                  "(plus group for the grouped procedure)")
    a.add_argument("--lambda", dest="lam", type=float, default=0.5)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--procedure", choices=("gbh1", "storey", "bh"), default="gbh1")
    a.add_argument("--out", default=None, help="write CSV here instead of stdout")
    a.set_defaults(fn=cmd_adjust)

    v = sub.add_parser("verify", help="run numerical audits")
    v.add_argument("--section", choices=("integrals", "m_bound", "mvt", "lemmas", "all"),
                   required=True)
    v.add_argument("--seed", type=int, default=20260822)
    v.add_argument("--reps", type=int, default=20000,
                   help="Monte Carlo replications for the lemmas section")
    v.add_argument("--out", default=None, help="write the JSON reports here")
    v.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the input-error code.
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (DomainError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def app() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
