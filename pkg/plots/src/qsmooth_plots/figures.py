"""Figure builders for the simulator's CSV and JSON outputs.

plot_trajectory   one observable from a trajectory CSV: the filter curve,
                  the smoothed symmetric estimate from t = tau onward, and
                  the imaginary skew part on a secondary axis, with a
                  vertical marker at tau.
plot_convergence  log-log max-error-vs-dt curves from a convergence report,
                  with fitted slopes in the legend when two or more dts
                  carry positive errors.
plot_mse_bars     symmetric vs combined estimation error by record length
                  for one observable, from an oracle report.

All figures are rendered through the object-oriented matplotlib API (no
pyplot, no global state), so output bytes depend only on inputs and style
options. SVG output strips the date metadata for the same reason.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import pathlib
import warnings

import numpy as np
from matplotlib.figure import Figure


class MissingColumn(ValueError):
    """A referenced column or observable is absent from the input file."""


@dataclasses.dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, what to draw, where to write it."""

    inputs: tuple[pathlib.Path, ...]
    out_image: pathlib.Path
    observable: str | None = None
    dpi: int = 150
    size: tuple[float, float] = (8.0, 4.5)


def _figure(spec: FigureSpec):
    fig = Figure(figsize=spec.size, dpi=spec.dpi)
    return fig, fig.add_subplot()


def _save(fig: Figure, spec: FigureSpec) -> pathlib.Path:
    out = spec.out_image
    kwargs = {}
    if out.suffix.lower() == ".svg":
        kwargs["metadata"] = {"Date": None}  # drop the timestamp, keep bytes stable
    fig.savefig(out, dpi=spec.dpi, **kwargs)
    return out


def _read_columns(path) -> dict[str, np.ndarray]:
    """CSV header -> float column arrays; empty cells become NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    header = rows[0]
    cells = np.array(rows[1:], dtype=object)
    if cells.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    out = {}
    for j, name in enumerate(header):
        col = np.array([float(c) if c != "" else np.nan for c in cells[:, j]])
        out[name] = col
    return out


def _observables(columns, prefix: str) -> list[str]:
    names = []
    for name in columns:
        parts = name.split(".")
        if len(parts) == 3 and parts[0] == prefix and parts[1] not in names:
            names.append(parts[1])
    return names


def plot_trajectory(csv_path, observable: str, out_image, dpi: int = 150,
                    size=(8.0, 4.5)) -> pathlib.Path:
    """Render one observable's filter and smoother curves from a trajectory CSV.

    The smoother columns are empty before t = tau, so tau is recovered as the
    first time they carry values; a vertical marker is drawn there. A CSV
    without smoother columns yields a filter-only figure and a warning.
    Raises MissingColumn if the observable is not in the header.
    """
    spec = FigureSpec((pathlib.Path(csv_path),), pathlib.Path(out_image),
                      observable, dpi, tuple(size))
    columns = _read_columns(csv_path)
    f_re = f"filter.{observable}.re"
    if f_re not in columns:
        have = _observables(columns, "filter")
        raise MissingColumn(
            f"column {f_re} not in {csv_path}; "
            f"available observables: {', '.join(have) or 'none'}")
    t = columns["t"]

    fig, ax = _figure(spec)
    ax.plot(t, columns[f_re], label=f"filter {observable}", color="C0")

    s_plus = f"smooth.{observable}.plus"
    s_minus = f"smooth.{observable}.minus_im"
    smooth_names = _observables(columns, "smooth")
    if not smooth_names:
        warnings.warn(f"{csv_path}: no smoother columns, drawing filter only")
    elif s_plus not in columns or s_minus not in columns:
        raise MissingColumn(
            f"column {s_plus} not in {csv_path}; "
            f"available observables: {', '.join(smooth_names)}")
    else:
        live = np.isfinite(columns[s_plus])
        if not live.any():
            raise ValueError(f"{csv_path}: smoother columns are all empty")
        k0 = int(np.argmax(live))
        ax.plot(t[live], columns[s_plus][live],
                label=f"smoothed {observable} (symmetric)", color="C1")
        ax.axvline(t[k0], color="0.4", linestyle=":", label=f"tau = {t[k0]:g}")
        ax2 = ax.twinx()
        ax2.plot(t[live], columns[s_minus][live], color="C2",
                 linestyle="--", label="skew part (imag)")
        ax2.set_ylabel("Im q_minus")
        h1, l1 = ax.get_legend_handles_labels()
        h2, l2 = ax2.get_legend_handles_labels()
        ax.legend(h1 + h2, l1 + l2, loc="best", fontsize="small")

    if not smooth_names:
        ax.legend(loc="best", fontsize="small")
    ax.set_xlabel("t")
    ax.set_ylabel(f"estimate of {observable}")
    ax.grid(True, alpha=0.3)
    return _save(fig, spec)


def fit_orders(rows) -> dict[str, float | None]:
    """Fitted log-log slope per error series, None when under two usable points.

    A point is usable when both dt and the error are positive; exact-zero
    errors (the QND estimand) carry no slope information.
    """
    series = [k for k in rows[0] if k != "dt"]
    dts = np.array([row["dt"] for row in rows], dtype=float)
    out = {}
    for name in series:
        errs = np.array([row[name] for row in rows], dtype=float)
        use = (dts > 0) & (errs > 0)
        if use.sum() >= 2 and len(np.unique(dts[use])) >= 2:
            slope = np.polyfit(np.log(dts[use]), np.log(errs[use]), 1)[0]
            out[name] = float(slope)
        else:
            out[name] = None
    return out


def plot_convergence(report_path, out_image, dpi: int = 150,
                     size=(6.0, 4.5)) -> pathlib.Path:
    """Log-log error-vs-dt figure from a convergence report JSON.

    Each series in the report's rows becomes one curve; legend entries carry
    the fitted slope when it exists. A single-dt report degrades to a scatter
    with no fit. An empty table is an error.
    """
    spec = FigureSpec((pathlib.Path(report_path),), pathlib.Path(out_image),
                      None, dpi, tuple(size))
    with open(report_path) as fh:
        report = json.load(fh)
    rows = report.get("rows") or []
    if not rows:
        raise ValueError(f"{report_path}: empty error table")
    orders = fit_orders(rows)
    dts = np.array([row["dt"] for row in rows], dtype=float)

    fig, ax = _figure(spec)
    for name, order in orders.items():
        errs = np.array([row[name] for row in rows], dtype=float)
        label = name if order is None else f"{name} (slope {order:.2f})"
        ax.plot(dts, errs, "o" if len(rows) == 1 else "o-", label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("dt")
    ax.set_ylabel("max error vs exact record values")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    return _save(fig, spec)


def plot_mse_bars(report_path, observable: str, out_image, dpi: int = 150,
                  size=(6.0, 4.5)) -> pathlib.Path:
    """Symmetric vs combined MSE by record length, from an oracle report."""
    spec = FigureSpec((pathlib.Path(report_path),), pathlib.Path(out_image),
                      observable, dpi, tuple(size))
    with open(report_path) as fh:
        report = json.load(fh)
    try:
        table = report["checks"]["mse_by_n"]
    except (KeyError, TypeError):
        raise ValueError(f"{report_path}: no checks.mse_by_n table") from None
    if observable not in table["symmetric"]:
        raise MissingColumn(
            f"observable {observable} not in {report_path}; "
            f"available observables: {', '.join(sorted(table['symmetric']))}")
    n = np.array(table["n"], dtype=float)

    fig, ax = _figure(spec)
    width = 0.38
    ax.bar(n - width / 2, table["symmetric"][observable], width,
           label="symmetric", color="C0")
    ax.bar(n + width / 2, table["combined"][observable], width,
           label="combined", color="C1")
    ax.set_xticks(n)
    ax.set_xlabel("record length n")
    ax.set_ylabel(f"MSE for {observable}")
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, spec)
