"""Entry points: one static figure per invocation.

qsmooth-plot-trajectory  CSV --obs NAME --out PATH [--dpi N]
qsmooth-plot-convergence JSON --out PATH [--dpi N]
qsmooth-plot-mse         JSON --obs NAME --out PATH [--dpi N]

Exit codes: 0 ok, 2 bad input (missing file or column, malformed or empty
report), 1 anything else.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")  # batch rendering only, never a display

from .figures import plot_convergence, plot_mse_bars, plot_trajectory


def _parser(doc: str, needs_obs: bool) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("path", help="input CSV/JSON path")
    if needs_obs:
        ap.add_argument("--obs", required=True, help="observable name")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--dpi", type=int, default=150)
    return ap


def _run(render) -> int:
    try:
        out = render()
    except (ValueError, FileNotFoundError) as exc:  # includes MissingColumn, bad JSON
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


def trajectory_main(argv=None) -> int:
    args = _parser("Filter and smoother curves for one observable.", True).parse_args(argv)
    return _run(lambda: plot_trajectory(args.path, args.obs, args.out, dpi=args.dpi))


def convergence_main(argv=None) -> int:
    args = _parser("Log-log error-vs-dt curves with fitted slopes.", False).parse_args(argv)
    return _run(lambda: plot_convergence(args.path, args.out, dpi=args.dpi))


def mse_main(argv=None) -> int:
    args = _parser("Symmetric vs combined MSE by record length.", True).parse_args(argv)
    return _run(lambda: plot_mse_bars(args.path, args.obs, args.out, dpi=args.dpi))
