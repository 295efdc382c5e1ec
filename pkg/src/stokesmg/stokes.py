"""Factorized Taylor-Hood Stokes system and the discrete solution operators."""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ContractViolation

log = logging.getLogger(__name__)

# pressure node pinned by the PinnedNode strategy: the corner (0, 0)
PINNED_NODE = 0

# Threshold pivoting that keeps the fill-reducing symmetric ordering; the
# default full partial pivoting destroys it (20x more fill at h = 1/64).
_LU_OPTIONS = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=1e-3,
                   options=dict(SymmetricMode=True))


class ConstraintStrategy(str, enum.Enum):
    ZERO_MEAN = "zero-mean"
    PINNED = "pinned"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"zero-mean": cls.ZERO_MEAN, "zeromean": cls.ZERO_MEAN,
                   "zeromeanaugmented": cls.ZERO_MEAN,
                   "pinned": cls.PINNED, "pinnednode": cls.PINNED}
        try:
            return aliases[str(value).lower().replace("_", "")]
        except KeyError:
            raise ConfigurationError(f"unknown constraint strategy {value!r}")


@dataclass
class StokesSolution:
    u: np.ndarray
    p: np.ndarray


def _zero_mean(fe, q):
    c = fe.mean_vector
    return q - (c @ q) / c.sum()


class StokesSystem:
    """Sparse LU factorization of the constrained saddle-point matrix.

    With the zero-mean strategy the block matrix ``[A B^T; B 0]`` is bordered
    by the pressure mean functional and a Lagrange multiplier.  With the
    pinned strategy the pressure dof at the corner (0, 0) is removed.

    :meth:`solve` returns the pressure in the strategy's own space (zero mean,
    or zero at the pinned node); the public ``apply_*`` maps always return
    zero-mean pressures.
    """

    def __init__(self, fe, strategy=ConstraintStrategy.ZERO_MEAN):
        self.fe = fe
        self.strategy = ConstraintStrategy.parse(strategy)
        self.n, self.m = fe.n, fe.m
        self.S = self._build_matrix()
        try:
            self._lu = spla.splu(self.S.tocsc(), **_LU_OPTIONS)
        except RuntimeError as exc:
            raise ConfigurationError(
                f"singular Stokes system ({self.strategy.value}): {exc}")
        self.solves = 0
        log.debug("factorized Stokes system: n=%d m=%d strategy=%s",
                  self.n, self.m, self.strategy.value)

    def _build_matrix(self):
        fe = self.fe
        A, B = fe.A, fe.B
        if self.strategy is ConstraintStrategy.ZERO_MEAN:
            c = sp.csr_matrix(fe.mean_vector[:, None])
            return sp.bmat([[A, B.T, None],
                            [B, None, c],
                            [None, c.T, None]], format="csr")
        keep = np.arange(self.m) != PINNED_NODE
        Br = B[keep]
        return sp.bmat([[A, Br.T], [Br, None]], format="csr")

    @property
    def size(self):
        return self.S.shape[0]

    def solve(self, rhs_u, rhs_p=None):
        """Solve ``S [u; p] = [rhs_u; rhs_p]`` (vectors or column blocks)."""
        rhs_u = np.asarray(rhs_u, dtype=float)
        if rhs_u.shape[0] != self.n:
            raise ContractViolation(
                f"velocity rhs has {rhs_u.shape[0]} rows, expected {self.n}")
        tail = rhs_u.shape[1:]
        if rhs_p is None:
            rhs_p = np.zeros((self.m,) + tail)
        rhs_p = np.asarray(rhs_p, dtype=float)
        if rhs_p.shape[0] != self.m:
            raise ContractViolation(
                f"pressure rhs has {rhs_p.shape[0]} rows, expected {self.m}")
        n, m = self.n, self.m
        rhs = np.zeros((self.size,) + tail)
        rhs[:n] = rhs_u
        if self.strategy is ConstraintStrategy.ZERO_MEAN:
            rhs[n:n + m] = rhs_p
            x = self._lu.solve(rhs)
            p = x[n:n + m]
        else:
            keep = np.arange(m) != PINNED_NODE
            rhs[n:] = rhs_p[keep]
            x = self._lu.solve(rhs)
            # the pinned matrix is less well conditioned: one refinement step
            x += self._lu.solve(rhs - self.S @ x)
            p = np.zeros((m,) + tail)
            p[keep] = x[n:]
        self.solves += 1 if rhs_u.ndim == 1 else rhs_u.shape[1]
        return x[:n], p

    # -- solution operators -------------------------------------------------

    def _check_control(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.fe.p:
            raise ContractViolation(
                f"control has {f.shape[0]} rows, expected {self.fe.p}")
        return f

    def state(self, f):
        """Velocity and zero-mean pressure for control coefficients ``f``."""
        f = self._check_control(f)
        u, p = self.solve(self.fe.M_uf @ f)
        return StokesSolution(u=u, p=_zero_mean(self.fe, p))

    def apply_U(self, f):
        return self.state(f).u

    def apply_P(self, f):
        return self.state(f).p

    def apply_U_adjoint(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[0] != self.n:
            raise ContractViolation(
                f"velocity data has {g.shape[0]} rows, expected {self.n}")
        w, _ = self.solve(self.fe.M_u @ g)
        return self.fe.mass_solve(self.fe.M_uf.T @ w)

    def apply_P_adjoint(self, q, strict=False):
        """L2 adjoint of the pressure map; ``q`` is shifted to zero mean."""
        q = np.asarray(q, dtype=float)
        if q.shape[0] != self.m:
            raise ContractViolation(
                f"pressure data has {q.shape[0]} rows, expected {self.m}")
        mean = self.fe.mean_vector @ q
        if strict and np.any(np.abs(mean) > 1e-10 * max(np.abs(q).max(), 1)):
            raise ContractViolation("pressure data does not have zero mean")
        q = _zero_mean(self.fe, q)
        w, _ = self.solve(np.zeros((self.n,) + q.shape[1:]), self.fe.M_p @ q)
        return self.fe.mass_solve(self.fe.M_uf.T @ w)


def factorize(fe, strategy=ConstraintStrategy.ZERO_MEAN):
    return StokesSystem(fe, strategy)
