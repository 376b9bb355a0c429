"""Finite-dimensional operator algebra for open-system estimation.

Operators on a d-dimensional Hilbert space are plain dense complex numpy
arrays. This module supplies the Hermitian structure (adjoints, commutators,
anticommutators), the quantum expectation Tr(rho X), and the two pre-inner
products that define the symmetric and skew least-mean-square estimates:

    inner(rho, X, Y)     = Tr(rho X^dag Y)
    sym_inner(rho, X, Y) = Tr(rho (X^dag Y + Y X^dag)) / 2

Both can be degenerate (semi-definite) when rho has a nontrivial kernel, so
they are "pre" inner products; estimates built from them are unique only up
to operators that vanish rho-almost surely.
"""

from __future__ import annotations

import numpy as np

# Default numerical tolerances for density-operator validation. Exact
# Hermiticity/positivity survive only in exact arithmetic; integrator drift
# below these levels is repaired silently, above them it is an error.
TOL_HERM = 1e-9
TOL_TRACE = 1e-9
TOL_PSD = 1e-9


def as_operator(a) -> np.ndarray:
    """Coerce to a dense complex square matrix."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {a.shape}")
    return a


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(a.T)


def _check_dims(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def bracket(a: np.ndarray, b: np.ndarray, sign: str) -> np.ndarray:
    """AB + BA for sign='plus' (anticommutator), AB - BA for sign='minus'."""
    _check_dims(a, b)
    if sign == "plus":
        return a @ b + b @ a
    if sign == "minus":
        return a @ b - b @ a
    raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")


def expect(rho, x: np.ndarray) -> complex:
    """Quantum expectation Tr(rho X)."""
    r = rho.op if isinstance(rho, DensityOperator) else rho
    _check_dims(r, x)
    return complex(np.trace(r @ x))


def inner(rho, x: np.ndarray, y: np.ndarray) -> complex:
    """Pre-inner product Tr(rho X^dag Y)."""
    r = rho.op if isinstance(rho, DensityOperator) else rho
    _check_dims(x, y)
    _check_dims(r, x)
    return complex(np.trace(r @ adjoint(x) @ y))


def sym_inner(rho, x: np.ndarray, y: np.ndarray) -> complex:
    """Symmetric pre-inner product Tr(rho (X^dag Y + Y X^dag)) / 2."""
    r = rho.op if isinstance(rho, DensityOperator) else rho
    _check_dims(x, y)
    _check_dims(r, x)
    xd = adjoint(x)
    return complex(0.5 * np.trace(r @ (xd @ y + y @ xd)))


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product."""
    return np.kron(a, b)


def partial_trace(a: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out all tensor factors except those in `keep`.

    `dims` lists the factor dimensions (product must equal a.dim); `keep` is
    an index or list of indices of factors to retain, in their original order.
    """
    a = as_operator(a)
    dims = list(dims)
    n = len(dims)
    if int(np.prod(dims)) != a.shape[0]:
        raise ValueError(f"dims {dims} do not factor dimension {a.shape[0]}")
    if isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted(int(k) for k in keep)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} factors")
    t = a.reshape(dims + dims)
    # contract row/column axes of every traced-out factor, back to front so
    # axis numbers stay valid
    for k in reversed(range(n)):
        if k not in keep:
            t = np.trace(t, axis1=k, axis2=k + (t.ndim // 2))
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def herm_defect(a: np.ndarray) -> float:
    """max |A - A^dag|, the distance from Hermiticity in max norm."""
    return float(np.abs(a - adjoint(a)).max()) if a.size else 0.0


def skew_defect(a: np.ndarray) -> float:
    """max |A + A^dag|, the distance from anti-Hermiticity in max norm."""
    return float(np.abs(a + adjoint(a)).max()) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = TOL_HERM) -> bool:
    return herm_defect(a) <= tol


class DensityOperator:
    """A validated density matrix: Hermitian, unit trace, positive.

    Validation happens at construction. The eigenvalue check runs on the
    symmetrized matrix (A + A^dag)/2 so that 1e-15 asymmetry from matrix
    products cannot flip eigh into complaining. Pass validate=False only for
    matrices already guaranteed valid (e.g. fresh from the positive-part
    projection in the integrator).
    """

    def __init__(self, op, tol_herm: float = TOL_HERM, tol_trace: float = TOL_TRACE,
                 tol_psd: float = TOL_PSD, validate: bool = True):
        op = as_operator(op)
        if validate:
            defect = herm_defect(op)
            if defect > tol_herm:
                raise ValueError(f"density operator not Hermitian: defect {defect:.3e} > {tol_herm:.0e}")
            tr = np.trace(op)
            if abs(tr - 1.0) > tol_trace:
                raise ValueError(f"density operator trace {tr:.12g} not 1 within {tol_trace:.0e}")
            evals = np.linalg.eigvalsh(0.5 * (op + adjoint(op)))
            if evals.min() < -tol_psd:
                raise ValueError(f"density operator not positive: min eigenvalue {evals.min():.3e}")
        op = op.copy()
        op.setflags(write=False)  # immutable: safe to share across threads
        self.op = op

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def expect(self, x: np.ndarray) -> complex:
        return expect(self.op, x)

    def __repr__(self):
        return f"DensityOperator(dim={self.dim})"
