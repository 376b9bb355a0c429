"""Fixed-point smoother in density-operator form.

The smoothed least-mean-square estimate of an observable X at a fixed past
time tau, given the record up to t >= tau, splits into a symmetric part
(real for Hermitian X) and a skew part (purely imaginary for Hermitian X).
Both are carried by a pair of matrices updated forward in time alongside the
filter: a Hermitian rho_plus (trace 1 at init) and an anti-Hermitian
rho_minus (zero at init). With M = L + L^dag and innovation
w = dy - Tr[M rho_filter] dt, one step reads

    rho_plus'  = rho_plus  + ([rho_plus, M]_+ + [rho_minus, M]_- - 2 Tr[M rho_plus] rho_plus ) w / 2
    rho_minus' = rho_minus + ([rho_plus, M]_- + [rho_minus, M]_+ - 2 Tr[M rho_plus] rho_minus) w / 2

where [A, B]_+- are the anti/commutator. The innovation is centered on the
filter state (w is the observation surprise relative to the filter), but the
damping coefficient is the pair's own trace Tr[M rho_plus]. The two traces
agree in exact arithmetic under the nondemolition condition, yet only the
rho_plus form conserves the normalization step by step: with it,
d Tr rho_plus = (Tr[M rho_plus] - Tr[M rho_plus] Tr rho_plus) w = 0 at
Tr rho_plus = 1 identically, and rho_minus keeps a zero diagonal in the
eigenbasis of M, so Tr rho_minus = 0 exactly. Centering the coefficient on
the filter instead lets the integrator's positivity projection (which kicks
in at order dt^2 whenever the filter hugs a pure state) leak into the trace.

The bracket structure preserves the Hermitian/anti-Hermitian split exactly
in exact arithmetic; float drift is repaired by re-symmetrizing each part
after the step. The traces are NOT renormalized: Tr rho_plus = 1 and
Tr rho_minus = 0 are conserved quantities of the recursion, and their drift
measures integration error.

This closed recursion requires the quantum nondemolition condition (L normal
and [H, L] = 0, see model.qnd_check): otherwise the estimand evolves in the
Heisenberg picture and the update couples to an unclosed hierarchy of
brackets. Non-QND systems are rejected with QndRequired; the discrete oracle
module handles them exactly instead.

Estimates: q_plus = Tr(rho_plus X), q_minus = Tr(rho_minus X), smoothed
estimate q = q_plus + q_minus. q is a weak-value-style complex number whose
real part is the optimal symmetric estimate and whose imaginary part
measures mean non-commutativity between X and the record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ExperimentSpec, SystemSpec, qnd_check, qnd_defects
from .operators import DensityOperator, adjoint
from .trajectory import FilterPath, TrajectoryRecord


class QndRequired(Exception):
    """The continuous smoother needs the nondemolition condition."""

    def __init__(self, sys: SystemSpec):
        normal_defect, comm_defect = qnd_defects(sys)
        super().__init__(
            "smoother requires a QND system: "
            f"|[L, L^dag]| = {normal_defect:.3e}, |[H, L]| = {comm_defect:.3e}")
        self.normal_defect = normal_defect
        self.comm_defect = comm_defect


@dataclass
class SmootherState:
    rho_plus: np.ndarray   # Hermitian, trace ~1
    rho_minus: np.ndarray  # anti-Hermitian, trace ~0
    t: float


def smoother_init(rho_tau: DensityOperator, tau: float = 0.0) -> SmootherState:
    """Start smoothing at time tau from the filter state rho_tau."""
    mat = rho_tau.op if isinstance(rho_tau, DensityOperator) else np.asarray(rho_tau, dtype=complex)
    return SmootherState(rho_plus=mat.copy(), rho_minus=np.zeros_like(mat), t=float(tau))


def _step_raw(rho_plus, rho_minus, M, w):
    """One Euler step of the pair recursion, before symmetry repair."""
    pM, Mp = rho_plus @ M, M @ rho_plus
    mM, Mm = rho_minus @ M, M @ rho_minus
    coeff = np.trace(Mp).real  # the pair's own M-trace conserves Tr rho_plus
    plus = rho_plus + 0.5 * ((pM + Mp) + (mM - Mm) - 2.0 * coeff * rho_plus) * w
    minus = rho_minus + 0.5 * ((pM - Mp) + (mM + Mm) - 2.0 * coeff * rho_minus) * w
    return plus, minus


def smoother_step(state: SmootherState, rho_filter: DensityOperator, dy: float,
                  dt: float, sys: SystemSpec) -> SmootherState:
    """Advance the smoothing pair by one record increment."""
    if not qnd_check(sys):
        raise QndRequired(sys)
    if not (np.isfinite(dy) and np.isfinite(dt)):
        raise ValueError(f"non-finite step inputs: dy={dy}, dt={dt}")
    rf = rho_filter.op if isinstance(rho_filter, DensityOperator) else rho_filter
    M = sys.L + adjoint(sys.L)
    w = dy - np.trace(M @ rf).real * dt  # observation surprise w.r.t. the filter
    plus, minus = _step_raw(state.rho_plus, state.rho_minus, M, w)
    # repair float drift; the exact recursion preserves both symmetry classes
    plus = 0.5 * (plus + adjoint(plus))
    minus = 0.5 * (minus - adjoint(minus))
    return SmootherState(rho_plus=plus, rho_minus=minus, t=state.t + dt)


def smoothed_estimate_parts(state: SmootherState, x: np.ndarray) -> tuple[complex, complex]:
    """(q_plus, q_minus) for observable x; q_plus is real and q_minus purely
    imaginary when x is Hermitian."""
    if x.shape != state.rho_plus.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {state.rho_plus.shape}")
    return complex(np.trace(state.rho_plus @ x)), complex(np.trace(state.rho_minus @ x))


def smoothed_estimate(state: SmootherState, x: np.ndarray) -> complex:
    """Combined estimate q_plus + q_minus of x at the smoothing time."""
    q_plus, q_minus = smoothed_estimate_parts(state, x)
    return q_plus + q_minus


@dataclass
class SmootherPath:
    """Smoother output on the grid from tau to t_final."""
    t: np.ndarray
    q_plus: dict    # name -> real array
    q_minus: dict   # name -> complex array (purely imaginary entries)
    trace_plus: np.ndarray   # Tr rho_plus per step, drift measures dt-error
    trace_minus: np.ndarray  # Tr rho_minus per step (complex)
    herm_drift: float = 0.0  # worst pre-repair symmetry defect seen
    skew_drift: float = 0.0


def smooth_trajectory(record: TrajectoryRecord, filter_path: FilterPath,
                      sys: SystemSpec, exp: ExperimentSpec) -> SmootherPath:
    """Run the fixed-point smoother for tau = exp.tau along one record.

    filter_path must come from filter_trajectory on the same record; the
    smoother consumes the filter state at every step to form the innovation.
    """
    if not qnd_check(sys):
        raise QndRequired(sys)
    n = exp.n_steps
    k0 = exp.tau_step
    if len(record.dy) != n or len(filter_path.rho) != n + 1:
        raise ValueError(
            f"grid mismatch: record has {len(record.dy)} steps, "
            f"filter path {len(filter_path.rho)} states, grid expects {n}")
    M = sys.L + adjoint(sys.L)
    n_out = n - k0 + 1
    t = exp.tau + exp.dt * np.arange(n_out)
    q_plus = {name: np.empty(n_out) for name in exp.observables}
    q_minus = {name: np.empty(n_out, dtype=complex) for name in exp.observables}
    trace_plus = np.empty(n_out)
    trace_minus = np.empty(n_out, dtype=complex)

    plus = filter_path.rho[k0].op.copy()
    minus = np.zeros_like(plus)
    herm_drift = skew_drift = 0.0

    def emit(j, plus, minus):
        trace_plus[j] = np.trace(plus).real
        trace_minus[j] = np.trace(minus)
        for name, x in exp.observables.items():
            q_plus[name][j] = np.trace(plus @ x).real
            q_minus[name][j] = np.trace(minus @ x)

    emit(0, plus, minus)
    for k in range(k0, n):
        rf = filter_path.rho[k].op
        w = record.dy[k] - np.trace(M @ rf).real * exp.dt
        plus, minus = _step_raw(plus, minus, M, w)
        herm_drift = max(herm_drift, float(np.abs(plus - adjoint(plus)).max()))
        skew_drift = max(skew_drift, float(np.abs(minus + adjoint(minus)).max()))
        plus = 0.5 * (plus + adjoint(plus))
        minus = 0.5 * (minus - adjoint(minus))
        emit(k - k0 + 1, plus, minus)
    return SmootherPath(t=t, q_plus=q_plus, q_minus=q_minus, trace_plus=trace_plus,
                        trace_minus=trace_minus, herm_drift=herm_drift, skew_drift=skew_drift)
