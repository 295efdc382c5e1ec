"""Matrix-free reduced Hessian of the tracking functional and its dense form."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolation

log = logging.getLogger(__name__)

DENSE_SIZE_LIMIT = 25_000


@dataclass(frozen=True)
class ControlParams:
    beta: float
    gamma_u: float = 1.0
    gamma_p: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.gamma_u < 0 or self.gamma_p < 0:
            raise ConfigurationError("tracking weights must be nonnegative")


class HessianOperator:
    """Reduced Hessian ``beta I + gamma_u U*U + gamma_p P*P`` on one level.

    :meth:`apply` works in operator form (the result is a control coefficient
    vector, i.e. it includes ``M_f^{-1}``); :meth:`apply_bilinear` returns the
    mass-weighted form ``M_f H f``.  Each application costs two Stokes solves
    and one mass solve, per column when given a 2-d block.
    """

    def __init__(self, fe, system, params):
        if system.fe is not fe:
            raise ContractViolation("Stokes system assembled on another level")
        self.fe = fe
        self.system = system
        self.params = params
        self.applies = 0

    @property
    def beta(self):
        return self.params.beta

    @property
    def size(self):
        return self.fe.p

    def _check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.fe.p:
            raise ContractViolation(
                f"control has {f.shape[0]} rows, expected {self.fe.p}")
        return f

    def _gauss_newton_part(self, f):
        """``L^T S^-1 M S^-1 L f`` (the bilinear form without beta)."""
        fe, prm = self.fe, self.params
        z_u, z_p = self.system.solve(fe.M_uf @ f)
        v_u, _ = self.system.solve(prm.gamma_u * (fe.M_u @ z_u),
                                   prm.gamma_p * (fe.M_p @ z_p))
        return fe.M_uf.T @ v_u

    def apply(self, f):
        f = self._check(f)
        self.applies += 1 if f.ndim == 1 else f.shape[1]
        return self.beta * f + self.fe.mass_solve(self._gauss_newton_part(f))

    __call__ = apply

    def apply_bilinear(self, f):
        f = self._check(f)
        self.applies += 1 if f.ndim == 1 else f.shape[1]
        return self.beta * (self.fe.M_f @ f) + self._gauss_newton_part(f)

    def data_functional(self, targets):
        """Stokes right-hand side ``M x_d`` built from projected targets."""
        fe, prm = self.fe, self.params
        return prm.gamma_u * targets.u_load, prm.gamma_p * (fe.M_p @ targets.p)

    def build_rhs(self, targets):
        """Right-hand side ``M_f^{-1} L^T S^{-1} M x_d`` of the reduced system."""
        prm = self.params
        if prm.gamma_u > 0 and not targets.has_velocity:
            raise ConfigurationError("gamma_u > 0 but no velocity target")
        if prm.gamma_p > 0 and not targets.has_pressure:
            raise ConfigurationError("gamma_p > 0 but no pressure target")
        rhs_u, rhs_p = self.data_functional(targets)
        v_u, _ = self.system.solve(rhs_u, rhs_p)
        return self.fe.mass_solve(self.fe.M_uf.T @ v_u)

    def gradient(self, f, targets):
        """Gradient of the reduced cost in operator form."""
        return self.apply(f) - self.build_rhs(targets)

    def cost(self, f, targets):
        """Reduced cost up to the constant terms in the targets."""
        f = self._check(f)
        hf = self.apply_bilinear(f)
        rhs = self.fe.M_f @ self.build_rhs(targets)
        return 0.5 * f @ hf - f @ rhs

    def materialize_dense(self, max_size=DENSE_SIZE_LIMIT, terms=None,
                          basis=None):
        """Dense symmetric matrix of the bilinear form ``(H f, g)``.

        ``terms`` may carry precomputed :class:`DenseTrackingTerms` for this
        level, in which case no Stokes solve is performed.  With ``basis`` the
        form is compressed to ``V^T B_H V``.
        """
        if terms is None:
            terms = DenseTrackingTerms.compute(
                self.fe, self.system, basis=basis, max_size=max_size,
                need_u=self.params.gamma_u > 0,
                need_p=self.params.gamma_p > 0)
            self.applies += terms.columns
        return terms.combine(self.params)


class DenseTrackingTerms:
    """Dense Gauss-Newton blocks ``G_u = L^T S^-1 M_u S^-1 L`` and ``G_p``.

    They do not depend on ``beta`` or the tracking weights, so one
    computation per level serves every parameter set.  Costs one Stokes solve
    per column plus one more per requested term.
    """

    def __init__(self, fe, G_u, G_p, mass, columns=0):
        self.fe = fe
        self.G_u = G_u
        self.G_p = G_p
        self.mass = mass
        self.columns = columns

    @classmethod
    def compute(cls, fe, system, basis=None, max_size=DENSE_SIZE_LIMIT,
                block=512, need_u=True, need_p=True):
        p = fe.p if basis is None else basis.shape[1]
        if p > max_size:
            raise ConfigurationError(
                f"refusing to densify {p} x {p} Hessian (limit {max_size})")
        if basis is None:
            basis = sp.identity(fe.p, format="csr")
        basis = sp.csr_matrix(basis)
        G_u = np.zeros((p, p)) if need_u else None
        G_p = np.zeros((p, p)) if need_p else None
        for start in range(0, p, block):
            cols = basis[:, start:start + block].toarray()
            z_u, z_p = system.solve(fe.M_uf @ cols)
            zeros_u = np.zeros_like(z_u)
            if need_u:
                v_u, _ = system.solve(fe.M_u @ z_u, np.zeros_like(z_p))
                G_u[:, start:start + block] = basis.T @ (fe.M_uf.T @ v_u)
            if need_p:
                v_u, _ = system.solve(zeros_u, fe.M_p @ z_p)
                G_p[:, start:start + block] = basis.T @ (fe.M_uf.T @ v_u)
        for G in (G_u, G_p):
            if G is not None:
                G += G.T
                G *= 0.5
        mass = (basis.T @ fe.M_f @ basis).toarray()
        return cls(fe, G_u, G_p, mass, columns=p)

    def gauss_newton(self, params):
        out = np.zeros_like(self.mass)
        if params.gamma_u > 0:
            if self.G_u is None:
                raise ConfigurationError("velocity tracking term not computed")
            out += params.gamma_u * self.G_u
        if params.gamma_p > 0:
            if self.G_p is None:
                raise ConfigurationError("pressure tracking term not computed")
            out += params.gamma_p * self.G_p
        return out

    def combine(self, params):
        out = self.gauss_newton(params)
        out += params.beta * self.mass
        return out


class DenseInverse:
    """Stored Cholesky factor of a dense bilinear-form Hessian.

    Applying it to ``r`` solves ``B_H x = M_f r``, i.e. applies ``H^{-1}`` in
    operator form.
    """

    def __init__(self, hessian, matrix=None):
        self.fe = hessian.fe
        self.beta = hessian.beta
        if matrix is None:
            matrix = hessian.materialize_dense()
        self._chol = sla.cho_factor(matrix, lower=True, overwrite_a=True,
                                    check_finite=False)
        self.solves = 0

    def apply(self, r):
        self.solves += 1
        return sla.cho_solve(self._chol, self.fe.M_f @ r, check_finite=False)

    __call__ = apply
