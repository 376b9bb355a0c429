#!/usr/bin/env python3
"""Convergence study: SDE filter/smoother error against the exact oracle.

Thin wrapper over `qsmooth compare`. For each dt in the ladder the filter and
smoother are integrated along every discrete measurement record and their
estimates compared with the exact conditional values; the report carries the
per-dt max errors and fitted empirical orders. Keep the ladder inside the
stable regime dt << 1/||L + L^dag||^2.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from qsmooth.cli import main as qsmooth_main

REPO = pathlib.Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(REPO / "configs" / "qnd_benchmark.json"))
    ap.add_argument("--out", default=str(REPO / "results" / "convergence"))
    ap.add_argument("--n-steps", type=int, default=8)
    ap.add_argument("--dts", default="1e-2,2e-3,1e-3")
    args = ap.parse_args(argv)

    rc = qsmooth_main(["compare", "--config", args.config, "--out", args.out,
                       "--n-steps", str(args.n_steps), "--dts", args.dts])
    if rc != 0:
        return rc
    report = json.loads((pathlib.Path(args.out) / "convergence.json").read_text())
    for key, order in (report["fitted_order"] or {}).items():
        print(f"{key}: fitted order {order:.3f}" if order is not None
              else f"{key}: order not fitted (need >= 2 dts)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
