"""Homodyne record simulation and the quantum filter.

The conditional state rho_t of a continuously monitored system obeys the
stochastic master equation

    drho = (-i[H, rho] + L rho L^dag - {L^dag L, rho}/2) dt
         + (L rho + rho L^dag - Tr[(L + L^dag) rho] rho) (dy - Tr[(L + L^dag) rho] dt)

driven by the measurement record increments dy. We integrate it with
Euler-Maruyama followed by a structure projection (symmetrize, clip negative
eigenvalues, renormalize the trace), so every stored state is a valid density
operator; the pre-projection defect is tracked as a discretization
diagnostic rather than hidden.

Truth-side records are generated by the same recursion started from the true
prior: under a vacuum probe the physical record law is exactly the filter's
innovation representation, dy = Tr[(L + L^dag) rho] dt + dW with dW a Wiener
increment. Mismatched-prior experiments change only the filter's initial
state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import ExperimentSpec, SystemSpec
from .operators import DensityOperator, adjoint

logger = logging.getLogger(__name__)


@dataclass
class RngStream:
    """A per-trajectory random substream.

    Counter-based (Philox) with key = (traj << 64) | seed, so streams are
    bit-reproducible and independent across trajectories and thread counts.
    """
    seed: int
    traj: int
    gen: np.random.Generator


def make_rng(seed: int, traj: int = 0) -> RngStream:
    key = (int(traj) << 64) | int(seed)
    return RngStream(seed=int(seed), traj=int(traj), gen=np.random.Generator(np.random.Philox(key=key)))


@dataclass
class TrajectoryRecord:
    """One measurement record: increments dy_k over [k dt, (k+1) dt)."""
    dt: float
    dy: np.ndarray
    seed_used: int


@dataclass
class FilterPath:
    """Filter output along one record: states and estimates on the grid."""
    rho: list  # DensityOperator at t_k = k dt, length n_steps + 1
    estimates: dict  # name -> complex array of Tr(rho_t X), length n_steps + 1
    min_eig_pre: float = 0.0   # most negative pre-projection eigenvalue seen
    herm_defect_pre: float = 0.0


def _sme_euler_raw(rho: np.ndarray, dy: float, dt: float, H: np.ndarray, L: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama step, before any structure projection."""
    Ld = adjoint(L)
    m_mean = np.trace(L @ rho + rho @ Ld).real  # Tr[(L + L^dag) rho]
    drift = -1j * (H @ rho - rho @ H) + L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L)
    innovation = L @ rho + rho @ Ld - m_mean * rho
    return rho + drift * dt + innovation * (dy - m_mean * dt)


def project_density(mat: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Symmetrize, clip negative eigenvalues, renormalize the trace.

    Returns (projected matrix, min eigenvalue before clipping, Hermiticity
    defect before symmetrization); the defects measure integrator drift.
    """
    defect = float(np.abs(mat - adjoint(mat)).max())
    sym = 0.5 * (mat + adjoint(mat))
    evals, vecs = np.linalg.eigh(sym)
    min_eig = float(evals[0])
    if min_eig < 0.0:
        clipped = np.clip(evals, 0.0, None)
        sym = (vecs * clipped) @ adjoint(vecs)
    return sym / np.trace(sym).real, min_eig, defect


def sme_step(rho, dy: float, dt: float, sys: SystemSpec) -> DensityOperator:
    """Advance the filter state by one measurement increment dy over dt."""
    if not (np.isfinite(dy) and np.isfinite(dt)):
        raise ValueError(f"non-finite step inputs: dy={dy}, dt={dt}")
    mat = rho.op if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    out, min_eig, defect = project_density(_sme_euler_raw(mat, dy, dt, sys.H, sys.L))
    if min_eig < -1e-6:
        logger.debug("projection clipped eigenvalue %.3e at dt=%g", min_eig, dt)
    # projection guarantees the invariants, skip revalidation on the hot path
    return DensityOperator(out, validate=False)


def simulate_truth(sys: SystemSpec, exp: ExperimentSpec, rng_stream: RngStream) -> TrajectoryRecord:
    """Draw one measurement record from the true model.

    Evolves the truth-side conditional state from sys.rho0 and emits
    dy_k = Tr[(L + L^dag) rho_k] dt + dW_k with dW_k ~ Normal(0, dt).
    """
    n = exp.n_steps
    dt = exp.dt
    dw = rng_stream.gen.standard_normal(n) * np.sqrt(dt)
    dy = np.empty(n)
    rho = sys.rho0.op
    M = sys.L + adjoint(sys.L)
    for k in range(n):
        dy[k] = np.trace(M @ rho).real * dt + dw[k]
        rho, _, _ = project_density(_sme_euler_raw(rho, dy[k], dt, sys.H, sys.L))
    return TrajectoryRecord(dt=dt, dy=dy, seed_used=rng_stream.seed)


def filter_trajectory(record: TrajectoryRecord, sys: SystemSpec, exp: ExperimentSpec) -> FilterPath:
    """Run the filter along a record, storing states and estimates per grid point."""
    n = exp.n_steps
    if len(record.dy) != n:
        raise ValueError(f"record has {len(record.dy)} steps, grid expects {n}")
    if abs(record.dt - exp.dt) > 1e-12:
        raise ValueError(f"record dt {record.dt} does not match experiment dt {exp.dt}")
    rho0 = exp.filter_rho0 if exp.filter_rho0 is not None else sys.rho0
    rho = rho0.op
    states = [DensityOperator(rho, validate=False)]
    est = {name: np.empty(n + 1, dtype=complex) for name in exp.observables}
    for name, x in exp.observables.items():
        est[name][0] = np.trace(rho @ x)
    min_eig_pre, defect_pre = 0.0, 0.0
    for k in range(n):
        out, min_eig, defect = project_density(_sme_euler_raw(rho, record.dy[k], exp.dt, sys.H, sys.L))
        min_eig_pre = min(min_eig_pre, min_eig)
        defect_pre = max(defect_pre, defect)
        rho = out
        states.append(DensityOperator(rho, validate=False))
        for name, x in exp.observables.items():
            est[name][k + 1] = np.trace(rho @ x)
    return FilterPath(rho=states, estimates=est, min_eig_pre=min_eig_pre, herm_defect_pre=defect_pre)
