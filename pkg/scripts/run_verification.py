#!/usr/bin/env python3
"""Run every verification suite on the stock desk-scale scenario.

Equivalent to `covform verify --config scenarios/all.json`, but usable as a
library example: builds the scenario in code, runs the suites, prints a
summary table, and writes the JSON report.
"""

import sys

from covform.report import Scenario, run_suite, write_json_atomic


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "verification-report.json"
    scn = Scenario(n=8, seed=7, suites=("all",))
    report = run_suite(scn)
    width = max(len(r["name"]) for r in report["checks"])
    for rec in report["checks"]:
        val = rec.get("value")
        vs = f"{val:.3e}" if isinstance(val, float) else str(val)
        order = rec.get("order")
        tail = f"  order={order}" if order not in (None, "") else ""
        print(f"{rec['status'].upper():5s}  {rec['name']:{width}s}  "
              f"{vs}{tail}")
    print(f"\n{report['n_checks'] - report['n_failed']}/{report['n_checks']} "
          f"checks passed")
    write_json_atomic(report, out)
    print(f"report written to {out}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
