"""Quantum trajectory filtering and fixed-point smoothing.

Simulates continuously monitored finite-dimensional quantum systems under
homodyne detection, integrates the quantum filter (stochastic master
equation), runs the fixed-point smoother that carries both the symmetric and
the skew part of the least-mean-square estimate, and validates everything
against an exact brute-force discrete-time oracle.
"""

__version__ = "0.1.0"

from .model import (ExperimentSpec, SystemSpec, ValidationError, load_spec,
                    make_system, qnd_check)
from .operators import (DensityOperator, adjoint, bracket, expect, inner,
                        partial_trace, sym_inner, tensor)
from .oracle import (BranchTable, CapExceeded, DegenerateBranches, DiscreteModel,
                     build_model, enumerate_records, oracle_mse,
                     verify_orthogonality)
from .smoother import (QndRequired, SmootherState, smooth_trajectory,
                       smoothed_estimate, smoothed_estimate_parts, smoother_init,
                       smoother_step)
from .trajectory import (FilterPath, TrajectoryRecord, filter_trajectory,
                         make_rng, simulate_truth, sme_step)

__all__ = [
    "ExperimentSpec", "SystemSpec", "ValidationError", "load_spec", "make_system",
    "qnd_check", "DensityOperator", "adjoint", "bracket", "expect", "inner",
    "partial_trace", "sym_inner", "tensor", "BranchTable", "CapExceeded",
    "DegenerateBranches", "DiscreteModel", "build_model", "enumerate_records", "oracle_mse",
    "verify_orthogonality", "QndRequired", "SmootherState", "smooth_trajectory",
    "smoothed_estimate", "smoothed_estimate_parts", "smoother_init", "smoother_step",
    "FilterPath", "TrajectoryRecord", "filter_trajectory", "make_rng",
    "simulate_truth", "sme_step", "__version__",
]
