"""Command-line driver: simulate | smooth | oracle | compare.

simulate  draws measurement records and runs the filter, one CSV per
          trajectory (columns t, dy, filter.<obs>.re, filter.<obs>.im).
smooth    same, plus the fixed-point smoother columns smooth.<obs>.plus and
          smooth.<obs>.minus_im populated from t = tau onward; records can
          also be replayed from existing CSVs via --records.
oracle    exhaustive discrete-model report (record table, orthogonality and
          unbiasedness residuals, MSE-by-record-length) as JSON.
compare   integrates filter and smoother along every discrete record at each
          requested dt and reports max errors against the exact oracle values
          plus the fitted empirical convergence order, as JSON.

Every command writes a manifest.json next to its outputs with the config
hash, effective seed, command name, output list, and tool version, so runs
are attributable and reproducible. Exit codes: 0 ok, 2 invalid config or
arguments, 3 smoothing requested for a non-QND system, 4 resource cap
exceeded, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys as _sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .model import ExperimentSpec, SystemSpec, ValidationError, load_spec, qnd_check
from .oracle import (CapExceeded, build_model, build_report, enumerate_records,
                     max_joint_dim)
from .smoother import QndRequired, smooth_trajectory
from .trajectory import TrajectoryRecord, filter_trajectory, make_rng, simulate_truth


def _fmt(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def _csv_rows(exp: ExperimentSpec, record: TrajectoryRecord, filter_path,
              smoother_path=None):
    """Yield header + data rows for one trajectory CSV."""
    names = list(exp.observables)
    header = ["t", "dy"]
    for name in names:
        header += [f"filter.{name}.re", f"filter.{name}.im"]
    if smoother_path is not None:
        for name in names:
            header += [f"smooth.{name}.plus", f"smooth.{name}.minus_im"]
    yield header
    n = exp.n_steps
    k0 = exp.tau_step
    for k in range(n + 1):
        row = [_fmt(k * exp.dt), _fmt(record.dy[k]) if k < n else ""]
        for name in names:
            est = filter_path.estimates[name][k]
            row += [_fmt(est.real), _fmt(est.imag)]
        if smoother_path is not None:
            for name in names:
                if k >= k0:
                    row += [_fmt(smoother_path.q_plus[name][k - k0]),
                            _fmt(smoother_path.q_minus[name][k - k0].imag)]
                else:
                    row += ["", ""]  # smoothing starts at tau
        yield row


def _write_csv(path: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerows(rows)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _write_manifest(out_dir: str, config_path: str, seed: int, command: str,
                    outputs: list) -> str:
    with open(config_path, "rb") as f:
        digest = hashlib.sha256(f.read()).hexdigest()
    payload = {
        "config_hash": digest,
        "seed": seed,
        "command": command,
        "outputs": sorted(outputs),
        "tool_version": __version__,
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    _write_json(tmp, payload)
    os.replace(tmp, path)  # atomic on POSIX: readers never see a torn manifest
    return path


def _run_trajectories(sys_spec: SystemSpec, exp: ExperimentSpec, out_dir: str,
                      threads: int, smooth: bool) -> list:
    os.makedirs(out_dir, exist_ok=True)

    def one(i: int) -> str:
        record = simulate_truth(sys_spec, exp, make_rng(exp.seed, i))
        fp = filter_trajectory(record, sys_spec, exp)
        sp = smooth_trajectory(record, fp, sys_spec, exp) if smooth else None
        name = f"traj_{i:04d}.csv"
        _write_csv(os.path.join(out_dir, name), _csv_rows(exp, record, fp, sp))
        return name

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(exp.n_traj)))
    return [one(i) for i in range(exp.n_traj)]


def _load_records(path: str, exp: ExperimentSpec) -> list:
    """Read measurement records back from trajectory CSVs (file or directory)."""
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.endswith(".csv"))
        if not files:
            raise ValidationError(f"records: no CSV files in {path}")
        files = [os.path.join(path, f) for f in files]
    elif os.path.isfile(path):
        files = [path]
    else:
        raise ValidationError(f"records: path not found: {path}")
    out = []
    for fname in files:
        with open(fname, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or "dy" not in reader.fieldnames:
                raise ValidationError(f"records: {fname} has no 'dy' column")
            dy = [row["dy"] for row in reader]
        if dy and dy[-1] == "":
            dy = dy[:-1]  # trailing grid point carries no increment
        if len(dy) != exp.n_steps:
            raise ValidationError(
                f"records: {fname} has {len(dy)} increments, grid expects {exp.n_steps}")
        values = np.array([float(v) for v in dy])
        out.append((os.path.basename(fname), TrajectoryRecord(dt=exp.dt, dy=values,
                                                              seed_used=exp.seed)))
    return out


def _replay_records(sys_spec: SystemSpec, exp: ExperimentSpec, records_path: str,
                    out_dir: str, threads: int) -> list:
    os.makedirs(out_dir, exist_ok=True)
    records = _load_records(records_path, exp)

    def one(item) -> str:
        name, record = item
        fp = filter_trajectory(record, sys_spec, exp)
        sp = smooth_trajectory(record, fp, sys_spec, exp)
        _write_csv(os.path.join(out_dir, name), _csv_rows(exp, record, fp, sp))
        return name

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, records))
    return [one(item) for item in records]


def compare_to_oracle(sys_spec: SystemSpec, exp: ExperimentSpec, dts: list,
                      n_steps: int) -> dict:
    """Max filter/smoother error against the exact oracle at each dt.

    For every dt a matched discrete model with n_steps probes is enumerated;
    each binary record maps to increments dy = outcome * sqrt(dt) and the SDE
    filter and smoother run along it from the true prior. Reported errors are
    maxima over kept records and observables at the final time.
    """
    if not qnd_check(sys_spec):
        raise QndRequired(sys_spec)
    rows = []
    for dt in dts:
        m = int(round(exp.tau / dt))
        if abs(exp.tau - m * dt) > 1e-12 or m > n_steps:
            raise ValidationError(
                f"compare: tau={exp.tau} not on the n_steps={n_steps} grid of dt={dt}")
        table = enumerate_records(build_model(sys_spec, n_steps, dt),
                                  exp.observables, m)
        # matched prior: the oracle's conditional states start from sys.rho0
        exp_dt = dataclasses.replace(exp, dt=dt, t_final=n_steps * dt, tau=m * dt,
                                     filter_rho0=None)
        err_filter = err_plus = err_minus = 0.0
        sqrt_dt = np.sqrt(dt)
        for i in np.flatnonzero(table.kept):
            record = TrajectoryRecord(dt=dt, dy=table.outcomes[i] * sqrt_dt,
                                      seed_used=exp.seed)
            fp = filter_trajectory(record, sys_spec, exp_dt)
            sp = smooth_trajectory(record, fp, sys_spec, exp_dt)
            for name, x in exp.observables.items():
                exact_filter = complex(np.trace(table.rho_y[i] @ x))
                err_filter = max(err_filter, abs(fp.estimates[name][-1] - exact_filter))
                err_plus = max(err_plus, abs(sp.q_plus[name][-1] - table.q_plus[name][i]))
                err_minus = max(err_minus, abs(sp.q_minus[name][-1] - table.q_minus[name][i]))
        rows.append({"dt": float(dt), "filter": err_filter,
                     "q_plus": err_plus, "q_minus": err_minus})

    fitted = None
    unique = sorted({row["dt"] for row in rows})
    if len(unique) >= 2:
        first = {dt: next(r for r in rows if r["dt"] == dt) for dt in unique}
        log_dt = np.log([dt for dt in unique])
        fitted = {}
        for key in ("filter", "q_plus", "q_minus"):
            errs = np.array([first[dt][key] for dt in unique])
            if (errs > 0).all():
                fitted[key] = float(np.polyfit(log_dt, np.log(errs), 1)[0])
            else:
                fitted[key] = None  # exact agreement leaves no slope to fit
    return {"n_steps": n_steps, "tau": exp.tau, "dts": [float(dt) for dt in dts],
            "rows": rows, "fitted_order": fitted}


def _parse_dts(raw: str) -> list:
    try:
        dts = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(f"--dts: not a comma-separated float list: {raw!r}") from None
    if not dts or any(dt <= 0 or not np.isfinite(dt) for dt in dts):
        raise ValidationError(f"--dts: need positive finite steps, got {raw!r}")
    return dts


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsmooth",
        description="Quantum trajectory filtering and fixed-point smoothing.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p_sim = sub.add_parser("simulate", help="draw records and run the filter")
    common(p_sim)
    p_sim.add_argument("--threads", type=int, default=1)

    p_smooth = sub.add_parser("smooth", help="filter plus fixed-point smoother")
    common(p_smooth)
    p_smooth.add_argument("--threads", type=int, default=1)
    p_smooth.add_argument("--records", default=None,
                          help="replay existing trajectory CSV file or directory")

    p_oracle = sub.add_parser("oracle", help="exact discrete-model report")
    common(p_oracle)
    p_oracle.add_argument("--n-steps", type=int, default=8)

    p_cmp = sub.add_parser("compare", help="filter/smoother error vs the oracle")
    common(p_cmp)
    p_cmp.add_argument("--n-steps", type=int, default=8)
    p_cmp.add_argument("--dts", default="1e-2,1e-3",
                       help="comma-separated time steps (default 1e-2,1e-3)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        sys_spec, exp = load_spec(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ValidationError(f"--seed: must be an unsigned 64-bit integer, got {args.seed}")
            exp = dataclasses.replace(exp, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)

        if args.command == "simulate":
            outputs = _run_trajectories(sys_spec, exp, args.out, args.threads, smooth=False)
        elif args.command == "smooth":
            if not qnd_check(sys_spec):
                raise QndRequired(sys_spec)
            if args.records is not None:
                outputs = _replay_records(sys_spec, exp, args.records, args.out, args.threads)
            else:
                outputs = _run_trajectories(sys_spec, exp, args.out, args.threads, smooth=True)
        elif args.command == "oracle":
            m = exp.tau_step
            if m > args.n_steps:
                raise ValidationError(
                    f"experiment.tau: step {m} exceeds --n-steps {args.n_steps}")
            report = build_report(sys_spec, exp.observables, args.n_steps, exp.dt, m=m,
                                  cap=max_joint_dim())
            _write_json(os.path.join(args.out, "oracle_report.json"), report)
            outputs = ["oracle_report.json"]
        else:  # compare
            report = compare_to_oracle(sys_spec, exp, _parse_dts(args.dts), args.n_steps)
            _write_json(os.path.join(args.out, "convergence.json"), report)
            outputs = ["convergence.json"]

        _write_manifest(args.out, args.config, exp.seed, args.command, outputs)
        return 0
    except ValidationError as e:
        print(f"error: {e}", file=_sys.stderr)
        return 2
    except QndRequired as e:
        print(f"error: {e}", file=_sys.stderr)
        return 3
    except CapExceeded as e:
        print(f"error: {e}", file=_sys.stderr)
        return 4
    except Exception as e:  # noqa: BLE001 - last-resort CLI boundary
        print(f"error: {type(e).__name__}: {e}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
