"""Discrete-time oracle: exact record enumeration and optimality checks.

The estimator table is cross-validated here against a second, independent
construction: solving the orthogonality conditions as a least-squares system
over record projectors. Agreement is at rounding level, so any structural
mistake in either path would show up immediately.
"""

import json

import numpy as np
import pytest

from qs_testlib import PLUS, SX, SY, SZ, random_density, random_hermitian
from qsmooth import CapExceeded, DegenerateBranches, make_system
from qsmooth.operators import adjoint
from qsmooth.oracle import (
    DirectMse,
    _chain_unitaries,
    _embed_step,
    _joint_estimand,
    _outcome_table,
    _rotation,
    build_model,
    build_report,
    discrete_filter,
    enumerate_records,
    kraus_operators,
    mse_by_n,
    oracle_mse,
    table_mse,
    verify_orthogonality,
)

H0 = np.zeros((2, 2), dtype=complex)


def test_step_unitary_is_unitary(qnd_sys):
    model = build_model(qnd_sys, 4, 0.05)
    u = model.step_unitary
    assert np.abs(u @ adjoint(u) - np.eye(4)).max() < 1e-12
    assert model.joint_dim == 2 * 2**4


def test_build_model_respects_cap(qnd_sys):
    with pytest.raises(CapExceeded):
        build_model(qnd_sys, 4, 0.05, cap=16)
    build_model(qnd_sys, 3, 0.05, cap=16)  # 2 * 2^3 = 16 is allowed


def test_cap_env_override(qnd_sys, monkeypatch):
    monkeypatch.setenv("QSMOOTH_MAX_JOINT_DIM", "64")
    with pytest.raises(CapExceeded):
        build_model(qnd_sys, 6, 0.05)
    build_model(qnd_sys, 5, 0.05)


def test_kraus_completeness(qnd_sys):
    model = build_model(qnd_sys, 1, 0.02)
    k_plus, k_minus = kraus_operators(model)
    total = adjoint(k_plus) @ k_plus + adjoint(k_minus) @ k_minus
    np.testing.assert_allclose(total, np.eye(2), atol=1e-12)


def test_outcome_table_convention():
    # outcome of probe j sits in bit j counted from the most significant end;
    # bit 0 encodes +1
    np.testing.assert_array_equal(
        _outcome_table(2), [[1, 1], [1, -1], [-1, 1], [-1, -1]])


def test_embed_step_against_direct_construction():
    rng = np.random.default_rng(8)
    d, n = 3, 3
    g = rng.normal(size=(2 * d, 2 * d)) + 1j * rng.normal(size=(2 * d, 2 * d))
    u, _ = np.linalg.qr(g)
    for k in range(n):
        got = _embed_step(u, d, n, k)
        # direct: move probe k next to the system, apply u, move back
        dim = d * 2**n
        direct = np.zeros((dim, dim), dtype=complex)
        for col in range(dim):
            s, bits = divmod(col, 2**n)
            b_k = (bits >> (n - 1 - k)) & 1
            rest = bits & ~(1 << (n - 1 - k))
            for s2 in range(d):
                for b2 in range(2):
                    amp = u[s2 * 2 + b2, s * 2 + b_k]
                    if amp != 0.0:
                        row = s2 * 2**n + (rest | (b2 << (n - 1 - k)))
                        direct[row, col] += amp
        np.testing.assert_allclose(got, direct, atol=1e-13)


def test_probabilities_are_exhaustive(qnd_sys):
    table = enumerate_records(build_model(qnd_sys, 5, 0.07),
                              {"sz": SZ}, 0, p_floor=0.0)
    assert table.kept.all()
    assert table.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert (table.p >= 0).all()


def test_discrete_filter_matches_table_states(qnd_sys):
    model = build_model(qnd_sys, 3, 0.1)
    table = enumerate_records(model, {}, 0)
    for i in range(8):
        states = discrete_filter(model, table.outcomes[i])
        assert len(states) == 4
        np.testing.assert_allclose(states[-1].op, table.rho_y[i], atol=1e-12)


def test_enumerate_records_rejects_bad_estimand_step(qnd_sys):
    model = build_model(qnd_sys, 3, 0.1)
    with pytest.raises(ValueError, match="estimand step"):
        enumerate_records(model, {}, -1)
    with pytest.raises(ValueError, match="estimand step"):
        enumerate_records(model, {}, 4)


def test_degenerate_branches(qnd_sys):
    model = build_model(qnd_sys, 2, 0.1)
    with pytest.raises(DegenerateBranches):
        enumerate_records(model, {}, 0, p_floor=1.0)


def test_skew_estimate_frozen_instance(qnd_sys):
    # two probes, dt = 0.1, estimand sigma_y at time zero: the repeated
    # outcome records carry all of the skew part
    table = enumerate_records(build_model(qnd_sys, 2, 0.1), {"sy": SY}, 0)
    np.testing.assert_allclose(
        table.p, [0.3373578171768158, 0.1626421828231842,
                  0.1626421828231842, 0.3373578171768158], atol=1e-12)
    np.testing.assert_allclose(table.q_plus["sy"], np.zeros(4), atol=1e-12)
    np.testing.assert_allclose(
        table.q_minus["sy"].imag,
        [-0.8761129683641984, 0.0, 0.0, 0.8761129683641984], atol=1e-12)
    np.testing.assert_allclose(table.q_minus["sy"].real, np.zeros(4), atol=1e-15)


def _record_projectors(model, m):
    """P_y at the final time, plus the joint state and estimand, by hand."""
    d, n = model.sys.dim, model.n_steps
    vac = np.zeros(2**n)
    vac[0] = 1.0
    rho_joint = np.kron(model.sys.rho0.op, np.outer(vac, vac))
    V, V_pref = _chain_unitaries(model, m)
    rv = _rotation(d, n) @ V
    projectors = []
    for y in range(2**n):
        e = np.zeros((d * 2**n, d * 2**n), dtype=complex)
        for s in range(d):
            e[s * 2**n + y, s * 2**n + y] = 1.0
        projectors.append(adjoint(rv) @ e @ rv)
    return rho_joint, projectors, V_pref


@pytest.mark.parametrize("n,m,hamiltonian", [(2, 0, H0), (3, 1, 0.3 * SZ)])
def test_orthogonality_solve_agrees_with_table(n, m, hamiltonian):
    # independent route: expand Q in record projectors and solve the normal
    # equations of each pre-inner product directly
    sys_spec = make_system(hamiltonian, SZ, PLUS)
    model = build_model(sys_spec, n, 0.1)
    table = enumerate_records(model, {"sy": SY}, m)
    rho_joint, projectors, v_pref = _record_projectors(model, m)
    x_tau = _joint_estimand(model, SY, m, v_pref)

    a_comb = np.array([[np.trace(rho_joint @ pz @ py) for py in projectors]
                       for pz in projectors])
    b_comb = np.array([np.trace(rho_joint @ pz @ x_tau) for pz in projectors])
    c_comb, *_ = np.linalg.lstsq(a_comb, b_comb, rcond=None)

    a_sym = np.array([[np.trace(rho_joint @ (pz @ py + py @ pz)).real / 2
                       for py in projectors] for pz in projectors])
    b_sym = np.array([np.trace(rho_joint @ (pz @ x_tau + x_tau @ pz)).real / 2
                      for pz in projectors])
    c_plus, *_ = np.linalg.lstsq(a_sym, b_sym, rcond=None)

    kept = table.kept
    assert np.abs(c_plus - table.q_plus["sy"])[kept].max() < 1e-10
    assert np.abs((c_comb - c_plus) - table.q_minus["sy"])[kept].max() < 1e-10


def test_orthogonality_residual_small(qnd_sys):
    model = build_model(qnd_sys, 6, 0.1)
    table = enumerate_records(model, {"sx": SX}, 0)
    assert verify_orthogonality(table, model, "sx", 0) < 1e-12


def test_unbiasedness_random_instance():
    rng = np.random.default_rng(12)
    sys_spec = make_system(random_hermitian(rng, 2),
                           rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)),
                           random_density(rng, 2))
    x = random_hermitian(rng, 2)
    model = build_model(sys_spec, 5, 0.04)
    table = enumerate_records(model, {"x": x}, 2, p_floor=0.0)
    mean_plus = float(table.p @ table.q_plus["x"])
    mean_minus = complex(table.p @ table.q_minus["x"])
    assert abs(mean_plus - table.first_moment["x"]) < 1e-12
    assert abs(mean_minus) < 1e-12


def test_mse_identities_agree(qnd_sys):
    # moment identity vs explicit quadratic form, on an instance with a
    # live skew part
    model = build_model(qnd_sys, 4, 0.1)
    table = enumerate_records(model, {"sy": SY}, 0)
    direct = DirectMse(model, SY, 0)
    q_comb = table.q_plus["sy"] + table.q_minus["sy"]
    assert table_mse(table, "sy", "combined") == pytest.approx(
        direct.combined(q_comb), abs=1e-12)
    assert table_mse(table, "sy", "symmetric") == pytest.approx(
        direct.symmetric(table.q_plus["sy"]), abs=1e-12)
    # the skew part strictly lowers the combined error here
    assert table_mse(table, "sy", "combined") < table_mse(table, "sy", "symmetric") - 1e-3


def test_optimality_under_perturbation(qnd_sys):
    model = build_model(qnd_sys, 4, 0.1)
    table = enumerate_records(model, {"sy": SY}, 0)
    direct = DirectMse(model, SY, 0)
    q_plus = table.q_plus["sy"]
    q_comb = q_plus + table.q_minus["sy"]
    base_sym = direct.symmetric(q_plus)
    base_comb = direct.combined(q_comb)
    rng = np.random.default_rng(0)
    for _ in range(5):
        d_real = rng.normal(size=q_plus.shape) * 1e-3
        d_cplx = (rng.normal(size=q_plus.shape)
                  + 1j * rng.normal(size=q_plus.shape)) * 1e-3
        assert direct.symmetric(q_plus + d_real) > base_sym
        assert direct.combined(q_comb + d_cplx) > base_comb


def test_more_observation_never_hurts(qnd_sys):
    t1 = enumerate_records(build_model(qnd_sys, 2, 0.1), {"sz": SZ}, 0)
    t2 = enumerate_records(build_model(qnd_sys, 5, 0.1), {"sz": SZ}, 0)
    mse1, mse2 = oracle_mse(t1, t2, "sz", 0)
    assert mse2 <= mse1 + 1e-12
    report = mse_by_n(qnd_sys, 0.1, 4, {"sz": SZ, "sy": SY}, 0)
    assert report["n"] == [1, 2, 3, 4]
    for kind in ("combined", "symmetric"):
        for name in ("sz", "sy"):
            seq = report[kind][name]
            assert len(seq) == 4
            assert all(b <= a + 1e-12 for a, b in zip(seq, seq[1:]))


def test_build_report_schema(qnd_sys):
    report = build_report(qnd_sys, {"sx": SX, "sy": SY}, 4, 0.1, m=0)
    json.dumps(report)  # must be directly serializable
    assert report["model"]["n_steps"] == 4
    assert report["model"]["joint_dim"] == 32
    assert report["checks"]["sum_p"] == pytest.approx(1.0, abs=1e-12)
    for name in ("sx", "sy"):
        assert report["checks"]["orthogonality_residual"][name] < 1e-10
        res = report["checks"]["unbiasedness_residual"][name]
        assert res["plus"] < 1e-10 and res["minus"] < 1e-10
    assert len(report["records"]) == 16
    first = report["records"][0]
    assert set(first) == {"y", "p", "q_plus", "q_minus_im"}
