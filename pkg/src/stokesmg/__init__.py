"""Multigrid preconditioners for Stokes-constrained optimal control.

Q2-Q1 Taylor-Hood discretization on the unit square, matrix-free reduced
Hessians, two-grid and multigrid preconditioners, preconditioned CG, dense
joint-spectrum analysis and an experiment driver.
"""

from .discretization import MeshLevel, TargetData, assemble, build_hierarchy
from .errors import ConfigurationError, ContractViolation, SolverBreakdown
from .hessian import ControlParams, DenseInverse, HessianOperator
from .krylov import SolveReport, pcg, recovery_errors, solve_control
from .preconditioner import LevelCache, PrecondHierarchy, build_preconditioner
from .spectral import (SpectralReport, filtered_distance, form_two_grid_dense,
                       joint_spectrum, two_grid_spectrum)
from .stokes import ConstraintStrategy, StokesSystem
from .transfer import TransferPair

__version__ = "0.1.0"
