"""Preconditioned conjugate gradients in the control-space L2 inner product."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .discretization import (interior_to_full, l2_error_pressure,
                             l2_error_velocity, l2_norm_function)
from .errors import ConfigurationError, SolverBreakdown

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    f_min: np.ndarray
    iterations: int
    residual_history: list
    converged: bool
    wall_time: float = 0.0
    counts: dict = field(default_factory=dict)
    status: str = ""

    @property
    def final_residual(self):
        return self.residual_history[-1]


def pcg(apply_H, apply_K, b, mass, tol=1e-12, max_iter=100):
    """Solve ``H x = b`` with ``H`` and ``K`` self-adjoint in ``(x, y) = x^T M y``.

    Starts from zero and stops when the M-norm of the (recursively updated)
    residual has dropped by ``tol``.  ``apply_K=None`` means plain CG.  On
    non-convergence the iterate with the smallest residual is returned.
    """
    def inner(x, y):
        return float(x @ (mass @ y))

    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b)
    r = b.copy()
    r0 = np.sqrt(inner(r, r))
    if r0 == 0.0:
        return SolveReport(x, 0, [0.0], True, time.perf_counter() - t0,
                           status="zero right-hand side")
    if not np.isfinite(r0):
        raise SolverBreakdown("non-finite right-hand side")

    history = [1.0]
    best_x, best_res = x.copy(), 1.0
    z = r.copy() if apply_K is None else apply_K(r)
    d = z.copy()
    rz = inner(r, z)
    converged = False
    status = "max_iter reached"
    it = 0
    for it in range(1, max_iter + 1):
        q = apply_H(d)
        curvature = inner(d, q)
        if not np.isfinite(curvature):
            raise SolverBreakdown(f"non-finite curvature at iteration {it}")
        if curvature <= 0.0:
            raise SolverBreakdown(
                f"non-positive curvature {curvature:.3e} at iteration {it}")
        alpha = rz / curvature
        x += alpha * d
        r -= alpha * q
        res = np.sqrt(inner(r, r)) / r0
        if not np.isfinite(res):
            raise SolverBreakdown(f"non-finite residual at iteration {it}")
        history.append(res)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            converged = True
            status = "converged"
            break
        z = r.copy() if apply_K is None else apply_K(r)
        rz_new = inner(r, z)
        if rz_new == 0.0:
            status = f"preconditioned residual vanished at iteration {it}"
            break
        d = z + (rz_new / rz) * d
        rz = rz_new

    if not converged:
        x = best_x
    return SolveReport(f_min=x, iterations=it, residual_history=history,
                       converged=converged,
                       wall_time=time.perf_counter() - t0, status=status)


def solve_control(hessian, targets, preconditioner=None, tol=1e-12,
                  max_iter=100):
    """Minimize the reduced tracking functional on the Hessian's level."""
    fe = hessian.fe
    start = hessian.system.solves
    b = hessian.build_rhs(targets)
    K = None
    if preconditioner is not None and preconditioner.num_levels > 1:
        K = preconditioner.apply
    report = pcg(hessian.apply, K, b, fe.M_f, tol=tol, max_iter=max_iter)
    report.counts["fine_stokes_solves"] = hessian.system.solves - start
    if preconditioner is not None:
        report.counts["preconditioner"] = preconditioner.apply_counts()
    return report


def recovery_errors(system, f_min, targets, npts=5):
    """Relative L2 errors of the optimal state against the analytic targets."""
    if targets.u_d is None or targets.p_d is None:
        raise ConfigurationError("recovery errors need analytic targets")
    fe = system.fe
    mesh = fe.mesh
    state = system.state(f_min)
    norm_u = l2_norm_function(mesh, targets.u_d, npts, vector=True)
    norm_p = l2_norm_function(mesh, targets.p_d, npts, vector=False)
    if norm_u == 0.0 or norm_p == 0.0:
        raise ConfigurationError("relative error of a zero target is undefined")
    e_u = l2_error_velocity(mesh, interior_to_full(fe, state.u),
                            targets.u_d, npts) / norm_u
    e_p = l2_error_pressure(mesh, state.p, targets.p_d, npts) / norm_p
    return e_u, e_p
