"""Command-line interface.

    covform verify --config <path> [--suite <name>] [--seed <u64>] [--out <path>]
    covform converge --config <path> --levels <k> --out <csv>
    covform show-scenario --config <path>

Exit codes: 0 all checks pass, 1 at least one check failed, 2 config parse
error, 3 validation error.  COVFORM_THREADS caps check parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys

from .report import (ConfigError, ValidationError, convergence_study,
                     load_scenario, run_suite, write_csv_atomic,
                     write_json_atomic)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE_ERROR = 2
EXIT_VALIDATION_ERROR = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covform",
                                description="verification workbench for "
                                            "covariant field-theory identities")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--config", required=True, help="scenario JSON path")
    v.add_argument("--suite", default=None,
                   help="override: one of identities|momenta|field-equations|"
                        "energy|gravity|all")
    v.add_argument("--seed", type=int, default=None, help="override the seed")
    v.add_argument("--out", default=None, help="report JSON output path")

    c = sub.add_parser("converge", help="run a grid-refinement study")
    c.add_argument("--config", required=True, help="scenario JSON path")
    c.add_argument("--levels", type=int, required=True,
                   help="number of grid levels (>= 2)")
    c.add_argument("--out", required=True, help="CSV output path")

    s = sub.add_parser("show-scenario", help="echo the resolved scenario")
    s.add_argument("--config", required=True, help="scenario JSON path")
    return p


def _cmd_verify(args) -> int:
    scn = load_scenario(args.config)
    if args.suite is not None and args.suite != "all" \
            and args.suite not in ("identities", "momenta", "field-equations",
                                   "energy", "gravity"):
        raise ValidationError(f"unknown suite {args.suite!r}")
    report = run_suite(scn, suite=args.suite, seed=args.seed)
    for rec in report["checks"]:
        tag = rec["status"].upper()
        extra = ""
        if rec.get("order") is not None and rec.get("order") != "":
            extra = f" order={rec['order']}"
        if rec["status"] == "error":
            extra = f" {rec.get('error', '')}"
        val = rec.get("value")
        vs = f"{val:.3e}" if isinstance(val, float) else str(val)
        print(f"[{tag:5s}] {rec['suite']}/{rec['name']}: value={vs}{extra}")
    out = args.out or scn.out.get("report")
    if out:
        write_json_atomic(report, out)
        print(f"report written to {out}")
    print(f"{report['n_checks'] - report['n_failed']}/{report['n_checks']} "
          f"checks passed")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def _cmd_converge(args) -> int:
    scn = load_scenario(args.config)
    rows = convergence_study(scn, args.levels)
    write_csv_atomic(rows, args.out)
    for row in rows:
        print(f"n={row['n']:4d} h={row['h']:.6f} "
              f"sup={row['sup_norm']:.6e} order={row['observed_order']}")
    print(f"table written to {args.out}")
    return EXIT_OK


def _cmd_show(args) -> int:
    scn = load_scenario(args.config)
    json.dump(scn.resolved(), sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_show(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION_ERROR


if __name__ == "__main__":
    sys.exit(main())
