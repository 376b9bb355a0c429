#!/usr/bin/env python3
"""Run the QND benchmark end to end: smoothed trajectories plus oracle report.

Drives the qsmooth CLI twice against the same config: `smooth` writes one CSV
per trajectory with filter and smoother columns, `oracle` writes the exact
discrete-model report used to sanity-check them. Outputs land in separate
subdirectories of --out so the manifests do not collide.
"""

from __future__ import annotations

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from qsmooth.cli import main as qsmooth_main

REPO = pathlib.Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(REPO / "configs" / "qnd_benchmark.json"))
    ap.add_argument("--out", default=str(REPO / "results" / "qnd_benchmark"))
    ap.add_argument("--n-steps", type=int, default=8,
                    help="probe count for the oracle report")
    args = ap.parse_args(argv)

    out = pathlib.Path(args.out)
    rc = qsmooth_main(["smooth", "--config", args.config,
                       "--out", str(out / "trajectories")])
    if rc != 0:
        return rc
    rc = qsmooth_main(["oracle", "--config", args.config,
                       "--out", str(out / "oracle"),
                       "--n-steps", str(args.n_steps)])
    if rc != 0:
        return rc
    print(f"benchmark outputs under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
