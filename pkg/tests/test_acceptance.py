"""Acceptance criteria A1-A8, one printed verdict line per criterion.

All instances are frozen: d=2 dispersive benchmark (H = 0, L = sigma_z,
rho0 = |+><+|) unless a criterion varies the system. Statistical margins are
seeded, so failures mean regressions, not noise.
"""

import time

import numpy as np

from qs_testlib import PLUS, SX, SY, SZ, random_density, random_hermitian
from qsmooth import make_system
from qsmooth.cli import main
from qsmooth.model import ExperimentSpec
from qsmooth.oracle import (
    DirectMse,
    build_model,
    enumerate_records,
    kraus_operators,
    mse_by_n,
    verify_orthogonality,
)
from qsmooth.smoother import smooth_trajectory, smoothed_estimate_parts, smoother_init, smoother_step
from qsmooth.trajectory import (
    TrajectoryRecord,
    filter_trajectory,
    make_rng,
    simulate_truth,
    sme_step,
)

H0 = np.zeros((2, 2), dtype=complex)
BENCH_OBS = {"sx": SX, "sy": SY, "sz": SZ}


def _verdict(tag: str, ok: bool, detail: str) -> None:
    print(f"{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{tag}: {detail}"


def test_a1_orthogonality(qnd_sys):
    t0 = time.perf_counter()
    model = build_model(qnd_sys, 8, 0.1)
    table = enumerate_records(model, {"sx": SX}, 0)
    residual = verify_orthogonality(table, model, "sx", 0)
    elapsed = time.perf_counter() - t0
    ok = residual <= 1e-10 and elapsed < 10.0
    _verdict("A1", ok,
             f"orthogonality residual {residual:.3e} (limit 1e-10), {elapsed:.1f}s")


def test_a2_uniqueness_optimality(qnd_sys):
    t0 = time.perf_counter()
    model = build_model(qnd_sys, 8, 0.1)
    table = enumerate_records(model, {"sx": SX}, 0)
    direct = DirectMse(model, SX, 0)
    q_plus = table.q_plus["sx"]
    q_comb = q_plus + table.q_minus["sx"]
    base_sym = direct.symmetric(q_plus)
    base_comb = direct.combined(q_comb)
    rng = np.random.default_rng(17)
    n_sym = n_comb = 0
    for _ in range(100):
        d_real = rng.normal(size=q_plus.shape) * 1e-3
        d_cplx = (rng.normal(size=q_plus.shape)
                  + 1j * rng.normal(size=q_plus.shape)) * 1e-3
        n_sym += direct.symmetric(q_plus + d_real) > base_sym
        n_comb += direct.combined(q_comb + d_cplx) > base_comb
    elapsed = time.perf_counter() - t0
    ok = n_sym == 100 and n_comb == 100 and elapsed < 30.0
    _verdict("A2", ok,
             f"{n_sym}/100 symmetric and {n_comb}/100 combined perturbations "
             f"strictly increase the error, {elapsed:.1f}s")


def test_a3_unbiasedness(qnd_sys):
    worst_plus = worst_minus = 0.0

    def check(sys_spec, n, dt):
        nonlocal worst_plus, worst_minus
        table = enumerate_records(build_model(sys_spec, n, dt), {"sx": SX}, 0,
                                  p_floor=0.0)
        mean_plus = float(table.p @ table.q_plus["sx"])
        mean_minus = complex(table.p @ table.q_minus["sx"])
        worst_plus = max(worst_plus, abs(mean_plus - table.first_moment["sx"]))
        worst_minus = max(worst_minus, abs(mean_minus))

    check(qnd_sys, 8, 0.1)
    rng = np.random.default_rng(23)
    for _ in range(20):
        sys_spec = make_system(
            random_hermitian(rng, 2),
            (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2),
            random_density(rng, 2))
        check(sys_spec, 6, 0.05)
    ok = worst_plus <= 1e-10 and worst_minus <= 1e-10
    _verdict("A3", ok,
             f"max |mean(q_plus) - mean(X)| = {worst_plus:.3e}, "
             f"max |mean(q_minus)| = {worst_minus:.3e} (limit 1e-10)")


def test_a4_monotone_mse(qnd_sys):
    report = mse_by_n(qnd_sys, 0.1, 10, BENCH_OBS, 0)
    worst = -np.inf
    for kind in ("combined", "symmetric"):
        for name in BENCH_OBS:
            seq = report[kind][name]
            worst = max(worst, max(b - a for a, b in zip(seq, seq[1:])))
    ok = worst <= 1e-12
    _verdict("A4", ok,
             f"largest MSE increase along n=1..10 is {worst:.3e} (limit 1e-12)")


def test_a5_filter_correctness(qnd_sys):
    t0 = time.perf_counter()
    dts = np.array([1e-2, 1e-3, 1e-4])
    errs = []
    for dt in dts:
        model = build_model(qnd_sys, 1, dt)
        k_plus, k_minus = kraus_operators(model)
        err = 0.0
        for kraus, sign in ((k_plus, 1.0), (k_minus, -1.0)):
            exact = kraus @ qnd_sys.rho0.op @ kraus.conj().T
            exact /= np.trace(exact).real
            approx = sme_step(qnd_sys.rho0, sign * np.sqrt(dt), dt, qnd_sys)
            err = max(err, np.abs(approx.op - exact).max())
        errs.append(err)
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])

    # trace after every step along a long noisy trajectory
    exp = ExperimentSpec(dt=1e-3, t_final=10.0, tau=0.0, n_traj=1, seed=21,
                         observables={})
    record = simulate_truth(qnd_sys, exp, make_rng(exp.seed, 0))
    rho = qnd_sys.rho0
    worst_trace = 0.0
    for dy in record.dy:
        rho = sme_step(rho, dy, exp.dt, qnd_sys)
        worst_trace = max(worst_trace, abs(np.trace(rho.op).real - 1.0))
    elapsed = time.perf_counter() - t0
    ok = order >= 1.4 and worst_trace <= 1e-12 and elapsed < 60.0
    _verdict("A5", ok,
             f"one-step order {order:.2f} (need >= 1.4), max trace error "
             f"{worst_trace:.1e} over 10^4 steps (limit 1e-12), {elapsed:.1f}s")


def test_a6_smoother_correctness(qnd_sys):
    t0 = time.perf_counter()
    n = 8
    rows = []
    worst_tau_gap = 0.0
    worst_trace_plus = worst_trace_minus = 0.0
    for dt in (1e-2, 1e-3):
        table = enumerate_records(build_model(qnd_sys, n, dt), BENCH_OBS, 0)
        exp = ExperimentSpec(dt=dt, t_final=n * dt, tau=0.0, n_traj=1, seed=0,
                             observables=BENCH_OBS)
        err_plus = err_minus = 0.0
        for i in np.flatnonzero(table.kept):
            record = TrajectoryRecord(dt=dt, dy=table.outcomes[i] * np.sqrt(dt),
                                      seed_used=0)
            fp = filter_trajectory(record, qnd_sys, exp)
            sp = smooth_trajectory(record, fp, qnd_sys, exp)
            for name in BENCH_OBS:
                err_plus = max(err_plus,
                               abs(sp.q_plus[name][-1] - table.q_plus[name][i]))
                err_minus = max(err_minus,
                                abs(sp.q_minus[name][-1] - table.q_minus[name][i]))
                worst_tau_gap = max(worst_tau_gap,
                                    abs(sp.q_plus[name][0]
                                        - fp.estimates[name][0].real))
            worst_trace_plus = max(worst_trace_plus,
                                   np.abs(sp.trace_plus - 1.0).max())
            worst_trace_minus = max(worst_trace_minus,
                                    np.abs(sp.trace_minus).max())
        rows.append((err_plus, err_minus))
    (p1, m1), (p2, m2) = rows
    order_plus = np.log(p1 / p2) / np.log(10.0)
    order_minus = np.log(m1 / m2) / np.log(10.0)
    elapsed = time.perf_counter() - t0
    ok = (p2 < p1 and m2 < m1 and order_plus >= 0.5 and order_minus >= 0.5
          and worst_tau_gap == 0.0
          and worst_trace_plus <= 1e-6 and worst_trace_minus <= 1e-6
          and elapsed < 120.0)
    _verdict("A6", ok,
             f"q_plus err {p1:.2e}->{p2:.2e} (order {order_plus:.2f}), "
             f"q_minus err {m1:.2e}->{m2:.2e} (order {order_minus:.2f}), "
             f"filter gap at tau {worst_tau_gap:.1e}, trace drift "
             f"{worst_trace_plus:.1e}/{worst_trace_minus:.1e} (limit 1e-6), "
             f"{elapsed:.1f}s")


def test_a7_structure_preservation(qnd_sys):
    exp = ExperimentSpec(dt=1e-3, t_final=10.0, tau=0.0, n_traj=1, seed=29,
                         observables=BENCH_OBS)
    record = simulate_truth(qnd_sys, exp, make_rng(exp.seed, 0))
    fp = filter_trajectory(record, qnd_sys, exp)

    # path-level: worst pre-repair symmetry defect across 10^4 steps
    sp = smooth_trajectory(record, fp, qnd_sys, exp)

    # state-level: walk the same record with explicit steps and check the
    # estimates keep their algebraic type for Hermitian observables
    state = smoother_init(fp.rho[0], tau=0.0)
    worst_herm = worst_skew = worst_q = 0.0
    for k, dy in enumerate(record.dy):
        state = smoother_step(state, fp.rho[k], dy, exp.dt, qnd_sys)
        worst_herm = max(worst_herm,
                         np.abs(state.rho_plus - state.rho_plus.conj().T).max())
        worst_skew = max(worst_skew,
                         np.abs(state.rho_minus + state.rho_minus.conj().T).max())
    for x in BENCH_OBS.values():
        q_plus, q_minus = smoothed_estimate_parts(state, x)
        worst_q = max(worst_q, abs(q_plus.imag), abs(q_minus.real))
    ok = (sp.herm_drift <= 1e-9 and sp.skew_drift <= 1e-9
          and worst_herm <= 1e-9 and worst_skew <= 1e-9 and worst_q <= 1e-9)
    _verdict("A7", ok,
             f"pre-repair drift {sp.herm_drift:.1e}/{sp.skew_drift:.1e}, state "
             f"defects {worst_herm:.1e}/{worst_skew:.1e}, estimate type error "
             f"{worst_q:.1e} over 10^4 steps (limit 1e-9)")


def test_a8_determinism(tmp_path):
    config = str(__import__("pathlib").Path(__file__).resolve().parents[1]
                 / "configs" / "qnd_benchmark.json")
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    code1 = main(["simulate", "--config", config, "--out", str(out1)])
    code2 = main(["simulate", "--config", config, "--out", str(out2)])
    names = sorted(p.name for p in out1.glob("*.csv"))
    identical = all((out1 / f).read_bytes() == (out2 / f).read_bytes()
                    for f in names)
    ok = code1 == 0 and code2 == 0 and len(names) == 3 and identical
    _verdict("A8", ok,
             f"{len(names)} trajectory CSVs byte-identical across reruns: {identical}")
