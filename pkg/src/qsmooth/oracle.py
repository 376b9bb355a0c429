"""Exact discrete-time oracle for the filter and the smoothed estimates.

The continuous measurement model is discretized as a repeated-interaction
chain: the system meets a fresh probe qubit (vacuum state |g>) for a step of
length dt through the unitary

    U = exp(G),   G = -i dt (H x I) + sqrt(dt) (L x sigma_+ - L^dag x sigma_-)

and each probe is then read out in its |+->  basis (outcomes +-1), which is
the finite-step version of homodyne detection of the field quadrature. The
second-order term of exp(G) reproduces the -L^dag L dt / 2 damping on the
vacuum, so one step matches the continuous evolution to O(dt^{3/2}).

Everything here is brute force on purpose: the joint state of system plus n
probe qubits is materialized as a dense dim * 2^n matrix and all 2^n records
are enumerated, so filter states, the symmetric least-mean-square estimate
q_plus, and the skew estimate q_minus come out exact (up to float rounding)
with no time discretization error beyond the model itself. For a record
projection P_y and the Heisenberg-picture estimand X_tau at step m,

    p(y)       = Tr[rho P_y]
    q_plus(y)  = Tr[rho (P_y X_tau + X_tau P_y)] / (2 p(y))   (real)
    q_minus(y) = Tr[rho (P_y X_tau - X_tau P_y)] / (2 p(y))   (purely imaginary)

These are the unique solutions of the symmetric and skew orthogonality
conditions on records of nonzero probability; records with p(y) below a
floor are excluded (they are the finite-data version of events that happen
almost never). n is capped by joint dimension rather than optimized.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, hadamard

from .model import SystemSpec
from .operators import DensityOperator, adjoint, partial_trace

P_FLOOR = 1e-12
DEFAULT_MAX_JOINT_DIM = 4096
ENV_MAX_JOINT_DIM = "QSMOOTH_MAX_JOINT_DIM"

# probe qubit basis: ground |g> = (1, 0)
_PROBE_RAISE = np.array([[0, 0], [1, 0]], dtype=complex)   # |e><g|
_PROBE_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)   # |g><e|
_PROBE_GROUND = np.array([[1, 0], [0, 0]], dtype=complex)  # |g><g|


class CapExceeded(Exception):
    """Joint dimension dim * 2^n_steps above the configured cap."""


class DegenerateBranches(Exception):
    """Every record probability fell below the floor."""


def max_joint_dim() -> int:
    """Default joint-dimension cap, overridable via QSMOOTH_MAX_JOINT_DIM."""
    raw = os.environ.get(ENV_MAX_JOINT_DIM)
    if raw is None:
        return DEFAULT_MAX_JOINT_DIM
    try:
        cap = int(raw)
        if cap < 2:
            raise ValueError
    except ValueError:
        raise ValueError(f"{ENV_MAX_JOINT_DIM} must be a positive integer, got {raw!r}") from None
    return cap


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    sys: SystemSpec
    n_steps: int
    dt: float
    step_unitary: np.ndarray  # on system x one probe qubit
    probe_ground: np.ndarray

    @property
    def joint_dim(self) -> int:
        return self.sys.dim * 2 ** self.n_steps


def build_model(sys: SystemSpec, n_steps: int, dt: float, cap: int | None = None) -> DiscreteModel:
    """Build the per-step unitary and check the joint-dimension cap."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if cap is None:
        cap = max_joint_dim()
    joint = sys.dim * 2 ** n_steps
    if joint > cap:
        raise CapExceeded(f"joint dimension {joint} exceeds cap {cap} "
                          f"(dim {sys.dim}, {n_steps} probe qubits)")
    eye2 = np.eye(2, dtype=complex)
    G = (-1j * dt * np.kron(sys.H, eye2)
         + np.sqrt(dt) * (np.kron(sys.L, _PROBE_RAISE) - np.kron(adjoint(sys.L), _PROBE_LOWER)))
    U = expm(G)
    defect = np.abs(adjoint(U) @ U - np.eye(2 * sys.dim)).max()
    if defect > 1e-12:
        raise ValueError(f"step unitary defect {defect:.3e}; G not anti-Hermitian?")
    U.setflags(write=False)
    return DiscreteModel(sys=sys, n_steps=n_steps, dt=dt, step_unitary=U,
                         probe_ground=_PROBE_GROUND.copy())


def kraus_operators(model: DiscreteModel) -> tuple[np.ndarray, np.ndarray]:
    """Measurement operators K_+- = <+-| U |g> for one step.

    Expanding the exponential, K_+- = (I - (iH + L^dag L / 2) dt +- L sqrt(dt))
    / sqrt(2) + O(dt^{3/2}).
    """
    d = model.sys.dim
    U4 = model.step_unitary.reshape(d, 2, d, 2)
    k_plus = (U4[:, 0, :, 0] + U4[:, 1, :, 0]) / np.sqrt(2)
    k_minus = (U4[:, 0, :, 0] - U4[:, 1, :, 0]) / np.sqrt(2)
    return k_plus, k_minus


def discrete_filter(model: DiscreteModel, outcomes) -> list[DensityOperator]:
    """Exact conditional states along one outcome sequence (+-1 per step)."""
    k_plus, k_minus = kraus_operators(model)
    rho = model.sys.rho0.op
    states = [model.sys.rho0]
    for o in outcomes:
        K = k_plus if o > 0 else k_minus
        unnorm = K @ rho @ adjoint(K)
        p = np.trace(unnorm).real
        if p <= 0:
            raise DegenerateBranches(f"outcome sequence hit probability {p:.3e}")
        rho = unnorm / p
        states.append(DensityOperator(rho))
    return states


def _embed_step(U: np.ndarray, d: int, n: int, k: int) -> np.ndarray:
    """Embed the step unitary acting on (system, probe k) into system x n probes."""
    D = d * 2 ** n
    full = np.kron(U, np.eye(2 ** (n - 1), dtype=complex)) if n > 1 else U
    t = full.reshape([d] + [2] * n + [d] + [2] * n)
    # row axes of `full`: 0 system, 1 interacting probe, 2.. spectator probes;
    # move the interacting probe to slot k (probes keep their original order)
    perm = [0] + list(range(2, 2 + k)) + [1] + list(range(2 + k, n + 1))
    return t.transpose(perm + [a + n + 1 for a in perm]).reshape(D, D)


def _chain_unitaries(model: DiscreteModel, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(V, V_prefix): the full n-step joint unitary and the first-m-steps one."""
    d, n = model.sys.dim, model.n_steps
    D = d * 2 ** n
    V = np.eye(D, dtype=complex)
    V_pref = V
    for k in range(n):
        V = _embed_step(model.step_unitary, d, n, k) @ V
        if k == m - 1:
            V_pref = V.copy()
    return V, V_pref


def _rotation(d: int, n: int) -> np.ndarray:
    """I_d x H^{x n}: rotates every probe to its |+-> basis. Real, symmetric,
    involutive, so it serves as both the rotation and its inverse."""
    had = hadamard(2 ** n).astype(float) * 2.0 ** (-n / 2)
    return np.kron(np.eye(d), had)


def _record_traces(mat: np.ndarray, R: np.ndarray, d: int, n: int) -> np.ndarray:
    """Tr_sys <y| M |y> for every record y, reading probes in the +- basis."""
    rot = R @ mat @ R
    return np.einsum("sysy->y", rot.reshape(d, 2 ** n, d, 2 ** n))


def _record_blocks(mat: np.ndarray, R: np.ndarray, d: int, n: int) -> np.ndarray:
    """System blocks <y| M |y> (shape 2^n x d x d) in the +- probe basis."""
    rot = R @ mat @ R
    return np.einsum("syty->yst", rot.reshape(d, 2 ** n, d, 2 ** n))


def _outcome_table(n: int) -> np.ndarray:
    """Record index -> outcome sequence. Bit j of the index is probe j
    (measured at step j+1); bit 0 means outcome +1, bit 1 means -1."""
    idx = np.arange(2 ** n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    return (1 - 2 * bits).astype(np.int8)


@dataclass(eq=False)
class BranchTable:
    """Exhaustive per-record results for one estimand time."""
    model: DiscreteModel
    m: int                       # estimand step: X is taken at time m * dt
    observables: dict            # name -> Hermitian matrix
    outcomes: np.ndarray         # (2^n, n) of +-1
    p: np.ndarray                # record probabilities
    kept: np.ndarray             # p >= p_floor mask
    rho_y: np.ndarray            # (2^n, d, d) conditional filter states
    q_plus: dict                 # name -> real array (2^n,)
    q_minus: dict                # name -> complex array (2^n,), purely imaginary
    first_moment: dict           # name -> Tr[rho_m X], the unconditional mean
    second_moment: dict          # name -> Tr[rho_m X^2]
    p_floor: float


def enumerate_records(model: DiscreteModel, observables: dict, m: int,
                      p_floor: float = P_FLOOR) -> BranchTable:
    """Enumerate all 2^n records and evaluate p, rho_y, q_plus, q_minus.

    The estimand is X at step m in the Heisenberg picture,
    X_tau = V_m^dag (X x I) V_m; m = 0 leaves X at the initial time.
    Estimates on records with p(y) < p_floor are zeroed and masked out.
    """
    d, n = model.sys.dim, model.n_steps
    if not 0 <= m <= n:
        raise ValueError(f"estimand step m={m} outside 0..{n}")
    V, V_pref = _chain_unitaries(model, m)
    vac = np.zeros((2 ** n, 2 ** n), dtype=complex)
    vac[0, 0] = 1.0
    rho_joint = np.kron(model.sys.rho0.op, vac)
    R = _rotation(d, n)

    rho_fin = V @ rho_joint @ adjoint(V)
    blocks = _record_blocks(rho_fin, R, d, n)
    p = np.einsum("yss->y", blocks).real
    kept = p >= p_floor
    if not kept.any():
        raise DegenerateBranches(f"every record probability is below the floor {p_floor:g}")
    safe_p = np.where(kept, p, 1.0)
    rho_y = np.where(kept[:, None, None], blocks / safe_p[:, None, None], 0.0)
    # conditional states are Hermitian up to rounding; repair for storage
    rho_y = 0.5 * (rho_y + np.conj(np.transpose(rho_y, (0, 2, 1))))

    # reduced system state at the estimand time, for the unconditional moments
    if m == 0:
        rho_m = model.sys.rho0.op
    else:
        rho_m = partial_trace(V_pref @ rho_joint @ adjoint(V_pref), [d, 2 ** n], keep=0)

    q_plus, q_minus, first, second = {}, {}, {}, {}
    eye_probes = np.eye(2 ** n, dtype=complex)
    for name, x in observables.items():
        if m == 0:
            x_tau = np.kron(x, eye_probes)
        else:
            x_tau = adjoint(V_pref) @ np.kron(x, eye_probes) @ V_pref
            x_tau = 0.5 * (x_tau + adjoint(x_tau))  # exactly Hermitian estimand
        # g(y) = Tr[rho P_y X_tau]; Hermiticity of rho, X_tau gives
        # Tr[rho X_tau P_y] = conj g(y), so q_plus = Re g / p, q_minus = i Im g / p
        g = _record_traces(V @ x_tau @ rho_joint @ adjoint(V), R, d, n)
        q_plus[name] = np.where(kept, g.real / safe_p, 0.0)
        q_minus[name] = np.where(kept, 1j * g.imag / safe_p, 0.0)
        first[name] = float(np.trace(rho_m @ x).real)
        second[name] = float(np.trace(rho_m @ x @ x).real)

    return BranchTable(model=model, m=m, observables=dict(observables),
                       outcomes=_outcome_table(n), p=p, kept=kept, rho_y=rho_y,
                       q_plus=q_plus, q_minus=q_minus,
                       first_moment=first, second_moment=second, p_floor=p_floor)


def _joint_estimand(model: DiscreteModel, x: np.ndarray, m: int, V_pref: np.ndarray) -> np.ndarray:
    eye_probes = np.eye(2 ** model.n_steps, dtype=complex)
    if m == 0:
        return np.kron(x, eye_probes)
    x_tau = adjoint(V_pref) @ np.kron(x, eye_probes) @ V_pref
    return 0.5 * (x_tau + adjoint(x_tau))


def verify_orthogonality(table: BranchTable, model: DiscreteModel, X: str, m: int) -> float:
    """Max residual of the defining orthogonality conditions over all records.

    Materializes Q = sum_y q_plus(y) P_y and Q_minus = sum_y q_minus(y) P_y as
    joint matrices and evaluates, for every kept record projection Z = P_y,

        |Tr[rho (Z (X_tau - Q) + (X_tau - Q) Z)] / 2|          (symmetric)
        |Tr[rho (Z X_tau - X_tau Z)] - 2 Tr[rho Q_minus Z]|    (skew)

    through plain matrix products, independent of how the table was filled.
    """
    if m != table.m:
        raise ValueError(f"table was built for estimand step {table.m}, got {m}")
    d, n = model.sys.dim, model.n_steps
    V, V_pref = _chain_unitaries(model, m)
    x_tau = _joint_estimand(model, table.observables[X], m, V_pref)
    vac = np.zeros((2 ** n, 2 ** n), dtype=complex)
    vac[0, 0] = 1.0
    rho_joint = np.kron(model.sys.rho0.op, vac)
    R = _rotation(d, n)
    RV = R @ V

    # Q_+- = V^dag R (I_d x diag(q)) R V; dropped records contribute nothing
    def materialize(q_vec):
        scale = np.tile(np.where(table.kept, q_vec, 0.0), d)
        return adjoint(RV) @ (scale[:, None] * RV)

    q_big = materialize(table.q_plus[X].astype(complex))
    q_minus_big = materialize(table.q_minus[X])
    err = x_tau - q_big

    t_sym_a = _record_traces(V @ err @ rho_joint @ adjoint(V), R, d, n)
    t_sym_b = _record_traces(V @ rho_joint @ err @ adjoint(V), R, d, n)
    res_sym = np.abs(0.5 * (t_sym_a + t_sym_b))

    t_left = _record_traces(V @ x_tau @ rho_joint @ adjoint(V), R, d, n)
    t_right = _record_traces(V @ rho_joint @ x_tau @ adjoint(V), R, d, n)
    t_skew = _record_traces(V @ rho_joint @ q_minus_big @ adjoint(V), R, d, n)
    res_skew = np.abs((t_left - t_right) - 2.0 * t_skew)

    kept = table.kept
    return float(max(res_sym[kept].max(), res_skew[kept].max()))


class DirectMse:
    """Direct quadratic-form evaluation of estimate errors on the joint model.

    Given any candidate record function q, materializes enough of
    E = X_tau - sum_y q(y) P_y to evaluate the error norms

        combined(q)  = Tr[rho E^dag E]
        symmetric(q) = Tr[rho (E^dag E + E E^dag)] / 2

    exactly. Used to confirm that the table's estimates are the minimizers:
    any perturbation must strictly increase the corresponding norm. Only the
    probe-vacuum columns/rows of E are needed because rho = rho_S x |vac><vac|.
    """

    def __init__(self, model: DiscreteModel, x: np.ndarray, m: int):
        d, n = model.sys.dim, model.n_steps
        V, V_pref = _chain_unitaries(model, m)
        x_tau = _joint_estimand(model, x, m, V_pref)
        self._rv = _rotation(d, n) @ V
        cols = np.arange(d) * 2 ** n  # joint indices of |s> x |vacuum>
        self._rv_cols = self._rv[:, cols]
        self._x_cols = x_tau[:, cols]
        self._x_rows = x_tau[cols, :]
        self._rho_s = model.sys.rho0.op
        self._d = d

    def _err_cols(self, q_tiled):
        return self._x_cols - adjoint(self._rv) @ (q_tiled[:, None] * self._rv_cols)

    def _err_rows(self, q_tiled):
        return self._x_rows - adjoint(self._rv_cols) @ (q_tiled[:, None] * self._rv)

    def combined(self, q: np.ndarray) -> float:
        q_tiled = np.tile(np.asarray(q, dtype=complex), self._d)
        e = self._err_cols(q_tiled)
        return float(np.trace(self._rho_s @ adjoint(e) @ e).real)

    def symmetric(self, q: np.ndarray) -> float:
        q_tiled = np.tile(np.asarray(q, dtype=complex), self._d)
        e_cols = self._err_cols(q_tiled)
        e_rows = self._err_rows(q_tiled)
        return float(0.5 * (np.trace(self._rho_s @ adjoint(e_cols) @ e_cols)
                            + np.trace(self._rho_s @ e_rows @ adjoint(e_rows))).real)


def table_mse(table: BranchTable, name: str, kind: str = "combined") -> float:
    """Mean squared error of the tabulated estimate of one observable.

    combined: <X - Q, X - Q>_rho with Q = Q_plus + Q_minus, equals
    Tr[rho X_tau^2] - sum_y p |q_plus + q_minus|^2 by orthogonality.
    symmetric: same with Q = Q_plus in the symmetrized norm.
    """
    q_p, q_m = table.q_plus[name], table.q_minus[name]
    if kind == "combined":
        captured = float((table.p[table.kept] * np.abs(q_p + q_m)[table.kept] ** 2).sum())
    elif kind == "symmetric":
        captured = float((table.p[table.kept] * q_p[table.kept] ** 2).sum())
    else:
        raise ValueError(f"kind must be 'combined' or 'symmetric', got {kind!r}")
    return table.second_moment[name] - captured


def oracle_mse(table_n1: BranchTable, table_n2: BranchTable, X: str, m: int) -> tuple[float, float]:
    """Exact combined MSEs at two record lengths; longer records cannot hurt."""
    for t in (table_n1, table_n2):
        if t.m != m:
            raise ValueError(f"table built for estimand step {t.m}, got {m}")
    if table_n1.model.n_steps > table_n2.model.n_steps:
        raise ValueError("table_n1 must have the shorter record")
    mse1 = table_mse(table_n1, X, "combined")
    mse2 = table_mse(table_n2, X, "combined")
    if mse2 > mse1 + 1e-12:
        raise AssertionError(
            f"MSE increased with record length: {mse1:.15g} -> {mse2:.15g} "
            f"(n {table_n1.model.n_steps} -> {table_n2.model.n_steps})")
    return mse1, mse2


def mse_by_n(sys: SystemSpec, dt: float, n_max: int, observables: dict, m: int = 0,
             cap: int | None = None, p_floor: float = P_FLOOR) -> dict:
    """Exact MSE tables for record lengths n = max(m, 1) .. n_max."""
    ns = list(range(max(m, 1), n_max + 1))
    out = {"n": ns,
           "combined": {name: [] for name in observables},
           "symmetric": {name: [] for name in observables}}
    for n in ns:
        table = enumerate_records(build_model(sys, n, dt, cap=cap), observables, m, p_floor)
        for name in observables:
            out["combined"][name].append(table_mse(table, name, "combined"))
            out["symmetric"][name].append(table_mse(table, name, "symmetric"))
    return out


def build_report(sys: SystemSpec, observables: dict, n_steps: int, dt: float, m: int = 0,
                 cap: int | None = None, p_floor: float = P_FLOOR) -> dict:
    """Full oracle report: per-record table plus self-checks, JSON-ready."""
    model = build_model(sys, n_steps, dt, cap=cap)
    table = enumerate_records(model, observables, m, p_floor)
    records = []
    for i in np.flatnonzero(table.kept):
        records.append({
            "y": [int(o) for o in table.outcomes[i]],
            "p": float(table.p[i]),
            "q_plus": {name: float(table.q_plus[name][i]) for name in observables},
            "q_minus_im": {name: float(table.q_minus[name][i].imag) for name in observables},
        })
    ortho = {name: verify_orthogonality(table, model, name, m) for name in observables}
    unbiased = {}
    for name in observables:
        kept = table.kept
        plus_res = abs(float((table.p[kept] * table.q_plus[name][kept]).sum())
                       - table.first_moment[name])
        minus_res = abs(complex((table.p[kept] * table.q_minus[name][kept]).sum()))
        unbiased[name] = {"plus": plus_res, "minus": minus_res}
    return {
        "model": {"dim": sys.dim, "n_steps": n_steps, "dt": dt, "estimand_step": m,
                  "joint_dim": model.joint_dim, "p_floor": p_floor},
        "records": records,
        "checks": {
            "sum_p": float(table.p.sum()),
            "orthogonality_residual": ortho,
            "unbiasedness_residual": unbiased,
            "mse_by_n": mse_by_n(sys, dt, n_steps, observables, m, cap=cap, p_floor=p_floor),
        },
    }
