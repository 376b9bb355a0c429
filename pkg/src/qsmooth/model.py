"""System and experiment declarations.

A SystemSpec fixes the physics (Hamiltonian H, measurement coupling L, initial
state rho0, hbar = 1); an ExperimentSpec fixes the numerics (time grid,
smoothing time tau, trajectory count, seed, observables to estimate). Both
load from a single JSON config file, see README for the schema. Complex
matrices are written as row-major nested arrays of [re, im] pairs; common
two-level operators have named presets.

qnd_check decides whether the density-form smoother recursion applies: it
tests the sufficient condition "L normal and [H, L] = 0", which guarantees
the measured quadrature commutes with the system-probe unitary at all times
without ever materializing that unitary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .operators import TOL_HERM, DensityOperator, adjoint, as_operator, herm_defect

GRID_TOL = 1e-12  # tau and t_final must sit on the dt grid this tightly


class ValidationError(Exception):
    """Config rejected; message starts with the offending field path."""


_PAULI = {
    "pauli_x": np.array([[0, 1], [1, 0]], dtype=complex),
    "pauli_y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "pauli_z": np.array([[1, 0], [0, -1]], dtype=complex),
    "lowering": np.array([[0, 1], [0, 0]], dtype=complex),  # |0><1|, sigma_minus
}


@dataclass(frozen=True, eq=False)
class SystemSpec:
    dim: int
    H: np.ndarray
    L: np.ndarray
    rho0: DensityOperator


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    dt: float
    t_final: float
    tau: float
    n_traj: int
    seed: int
    observables: dict = field(default_factory=dict)  # name -> Hermitian matrix
    filter_rho0: DensityOperator | None = None  # defaults to sys.rho0

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def tau_step(self) -> int:
        return int(round(self.tau / self.dt))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.setflags(write=False)
    return a


def _matrix(node, dim: int, path: str) -> np.ndarray:
    """Parse a matrix node: named preset or nested [re, im] arrays."""
    if isinstance(node, str):
        if node == "identity":
            return np.eye(dim, dtype=complex)
        if node in _PAULI:
            if dim != 2:
                raise ValidationError(f"{path}: preset {node!r} requires dim 2, got {dim}")
            return _PAULI[node].copy()
        raise ValidationError(
            f"{path}: unknown preset {node!r} (known: identity, {', '.join(sorted(_PAULI))})")
    try:
        arr = np.asarray(node, dtype=float)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{path}: not a matrix of [re, im] pairs ({e})") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(
            f"{path}: expected shape (n, n, 2) of [re, im] pairs, got {arr.shape}")
    if arr.shape[0] != dim:
        raise ValidationError(f"{path}: matrix is {arr.shape[0]}x{arr.shape[0]}, dim is {dim}")
    return arr[:, :, 0] + 1j * arr[:, :, 1]


def _density(node, dim: int, path: str) -> DensityOperator:
    mat = _matrix(node, dim, path)
    try:
        return DensityOperator(mat)
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from None


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ValidationError(f"{path}.{key}: missing")
    return table[key]


def _positive_number(x, path: str) -> float:
    if not isinstance(x, (int, float)) or isinstance(x, bool) or not np.isfinite(x) or x <= 0:
        raise ValidationError(f"{path}: must be a positive finite number, got {x!r}")
    return float(x)


def _on_grid(t: float, dt: float, path: str) -> float:
    if abs(t - round(t / dt) * dt) > GRID_TOL:
        raise ValidationError(f"{path}: {t} is not an integer multiple of dt={dt}")
    return float(t)


def load_spec(path) -> tuple[SystemSpec, ExperimentSpec]:
    """Load and validate a config file; see module docstring for the schema."""
    try:
        with open(path, "rb") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ValidationError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"config: parse error in {path}: {e}") from None
    if not isinstance(raw, dict):
        raise ValidationError("config: top level must be an object")

    sys_node = _require(raw, "system", "config")
    dim = _require(sys_node, "dim", "system")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValidationError(f"system.dim: must be a positive integer, got {dim!r}")
    H = _matrix(_require(sys_node, "H", "system"), dim, "system.H")
    defect = herm_defect(H)
    if defect > TOL_HERM:
        raise ValidationError(f"system.H: not Hermitian (defect {defect:.3e})")
    L = _matrix(_require(sys_node, "L", "system"), dim, "system.L")
    rho0 = _density(_require(sys_node, "rho0", "system"), dim, "system.rho0")
    sys_spec = SystemSpec(dim=dim, H=_freeze(H), L=_freeze(L), rho0=rho0)

    exp_node = _require(raw, "experiment", "config")
    dt = _positive_number(_require(exp_node, "dt", "experiment"), "experiment.dt")
    t_final = _positive_number(_require(exp_node, "t_final", "experiment"), "experiment.t_final")
    _on_grid(t_final, dt, "experiment.t_final")
    tau = _require(exp_node, "tau", "experiment")
    if not isinstance(tau, (int, float)) or isinstance(tau, bool) or not (0 <= tau <= t_final):
        raise ValidationError(f"experiment.tau: must lie in [0, t_final], got {tau!r}")
    tau = _on_grid(float(tau), dt, "experiment.tau")
    n_traj = _require(exp_node, "n_traj", "experiment")
    if not isinstance(n_traj, int) or isinstance(n_traj, bool) or n_traj < 1:
        raise ValidationError(f"experiment.n_traj: must be a positive integer, got {n_traj!r}")
    seed = _require(exp_node, "seed", "experiment")
    if not isinstance(seed, int) or isinstance(seed, bool) or not (0 <= seed < 2**64):
        raise ValidationError(f"experiment.seed: must be an unsigned 64-bit integer, got {seed!r}")

    obs_node = exp_node.get("observables", {})
    if not isinstance(obs_node, dict):
        raise ValidationError("experiment.observables: must be an object of name -> matrix")
    observables = {}
    for name, node in obs_node.items():
        x = _matrix(node, dim, f"experiment.observables.{name}")
        defect = herm_defect(x)
        if defect > TOL_HERM:
            raise ValidationError(
                f"experiment.observables.{name}: not Hermitian (defect {defect:.3e})")
        observables[name] = _freeze(x)

    filter_rho0 = None
    if "filter_rho0" in exp_node:
        filter_rho0 = _density(exp_node["filter_rho0"], dim, "experiment.filter_rho0")

    exp_spec = ExperimentSpec(dt=dt, t_final=t_final, tau=tau, n_traj=n_traj, seed=seed,
                              observables=observables, filter_rho0=filter_rho0)
    return sys_spec, exp_spec


def qnd_check(sys: SystemSpec, tol: float = 1e-9) -> bool:
    """True iff L is normal and commutes with H, within tol in max norm.

    This is sufficient for the measured quadrature L + L^dag to commute with
    the joint unitary at every time, which the density-form smoother needs.
    """
    L, H = sys.L, sys.H
    Ld = adjoint(L)
    normal = np.abs(L @ Ld - Ld @ L).max() <= tol
    commuting = np.abs(H @ L - L @ H).max() <= tol
    return bool(normal and commuting)


def qnd_defects(sys: SystemSpec) -> tuple[float, float]:
    """Max-norm sizes of [L, L^dag] and [H, L]; both ~0 under QND."""
    L, H = sys.L, sys.H
    Ld = adjoint(L)
    return float(np.abs(L @ Ld - Ld @ L).max()), float(np.abs(H @ L - L @ H).max())


def make_system(H, L, rho0) -> SystemSpec:
    """Build a SystemSpec from matrices, with the same checks as load_spec."""
    H = as_operator(H)
    defect = herm_defect(H)
    if defect > TOL_HERM:
        raise ValidationError(f"system.H: not Hermitian (defect {defect:.3e})")
    L = as_operator(L)
    if L.shape != H.shape:
        raise ValidationError(f"system.L: shape {L.shape} does not match H {H.shape}")
    if not isinstance(rho0, DensityOperator):
        rho0 = DensityOperator(rho0)
    if rho0.dim != H.shape[0]:
        raise ValidationError(f"system.rho0: dim {rho0.dim} does not match H {H.shape}")
    return SystemSpec(dim=H.shape[0], H=_freeze(H), L=_freeze(L), rho0=rho0)
