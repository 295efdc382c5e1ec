"""
Two-grid and multigrid preconditioners for the reduced Hessian.

Levels are indexed from the base (0, the coarsest grid, where the Hessian is
inverted exactly) to the finest grid.  The multigrid operator is defined by

* base:          K_0 = H_0^{-1}
* intermediate:  K_i = N_i(G_i(K_{i-1}))
* finest:        K   = G(K_{L-2})

with the coarse lift ``G_i(T) r = T pi r + (r - pi r) / beta`` and the Newton
step ``N_i(X) r = 2 X r - X H_i X r``.  No Hessian product is taken on the
finest grid.
"""

import enum
import logging

import numpy as np

from .discretization import MeshLevel, assemble
from .errors import ConfigurationError
from .hessian import DenseInverse, DenseTrackingTerms, HessianOperator
from .stokes import StokesSystem
from .transfer import TransferPair

log = logging.getLogger(__name__)


class PrecondKind(str, enum.Enum):
    IDENTITY = "identity"
    TWO_GRID = "two-grid"
    MULTIGRID = "multigrid"


def coarse_lift(transfer, beta, coarse_apply, r):
    """``G(T) r = P T(pi r) + beta^{-1} (r - P pi r)``."""
    c = transfer.project_to_coarse(r)
    smooth = transfer.prolong(c)
    return transfer.prolong(coarse_apply(c)) + (r - smooth) / beta


def newton_step(hessian, approx_inverse, r):
    """``N(X) r = 2 X r - X H X r``."""
    y = approx_inverse(r)
    return 2.0 * y - approx_inverse(hessian.apply(y))


class PrecondHierarchy:
    """Operators for every grid from the base level up to the finest.

    ``hessians[i]`` and ``fes[i]`` belong to level ``i``; ``transfers[i]``
    maps level ``i`` to ``i + 1``.  The finest Hessian is kept for the outer
    Krylov iteration but never applied inside the preconditioner.
    """

    def __init__(self, fes, hessians, transfers, base_inverse=None):
        self.fes = list(fes)
        self.hessians = list(hessians)
        self.transfers = list(transfers)
        self.base_inverse = base_inverse
        if len(self.transfers) != len(self.fes) - 1:
            raise ConfigurationError("need one transfer per pair of levels")
        if self.num_levels > 1 and base_inverse is None:
            raise ConfigurationError("multilevel preconditioner needs a base "
                                     "inverse")

    @property
    def num_levels(self):
        return len(self.fes)

    @property
    def kind(self):
        if self.num_levels == 1:
            return PrecondKind.IDENTITY
        if self.num_levels == 2:
            return PrecondKind.TWO_GRID
        return PrecondKind.MULTIGRID

    @property
    def beta(self):
        return self.hessians[-1].beta

    @property
    def finest_hessian(self):
        return self.hessians[-1]

    @property
    def base_level(self):
        return self.fes[0].mesh.level

    # -- application -----------------------------------------------------

    def lift(self, i, coarse_apply, r):
        """``G_i`` on level ``i >= 1`` with the given coarse operator."""
        return coarse_lift(self.transfers[i - 1], self.beta, coarse_apply, r)

    def newton(self, i, approx_inverse, r):
        """``N_i`` on level ``i`` using that level's matrix-free Hessian."""
        return newton_step(self.hessians[i], approx_inverse, r)

    def _apply_level(self, i, r):
        if i == 0:
            return self.base_inverse.apply(r)

        def lifted(x):
            return self.lift(i, lambda c: self._apply_level(i - 1, c), x)

        if i == self.num_levels - 1:
            return lifted(r)
        return self.newton(i, lifted, r)

    def apply(self, r):
        """Apply the multigrid preconditioner (identity for one level)."""
        r = np.asarray(r, dtype=float)
        if self.num_levels == 1:
            return r.copy()
        return self._apply_level(self.num_levels - 1, r)

    __call__ = apply

    def apply_two_grid(self, r):
        """``L r = P H_2h^{-1} pi r + beta^{-1} (I - P pi) r``."""
        if self.num_levels != 2:
            raise ConfigurationError("two-grid operator needs exactly two "
                                     "levels")
        return self.lift(1, self.base_inverse.apply, np.asarray(r, float))

    # -- cost accounting ---------------------------------------------------

    def reset_counts(self):
        for H in self.hessians:
            H.applies = 0
            H.system.solves = 0
        if self.base_inverse is not None:
            self.base_inverse.solves = 0

    def apply_counts(self):
        """Per-level Hessian applies and Stokes solves, plus base solves."""
        levels = []
        for fe, H in zip(self.fes, self.hessians):
            levels.append({"level": fe.mesh.level,
                           "hessian_applies": H.applies,
                           "stokes_solves": H.system.solves})
        base = 0 if self.base_inverse is None else self.base_inverse.solves
        return {"levels": levels, "base_solves": base}


def precond_apply_count(pc):
    return pc.apply_counts()


class LevelCache:
    """Assembled matrices, Stokes factorizations and dense terms per level.

    Shared between all parameter sets of a run, so each level is factorized
    once.
    """

    def __init__(self, strategy="zero-mean", control_space="full"):
        self.strategy = strategy
        self.control_space = control_space
        self._fe = {}
        self._sys = {}
        self._terms = {}
        self._transfers = {}

    def fe(self, level):
        if level not in self._fe:
            self._fe[level] = assemble(MeshLevel(level), self.control_space)
        return self._fe[level]

    def system(self, level):
        if level not in self._sys:
            self._sys[level] = StokesSystem(self.fe(level), self.strategy)
        return self._sys[level]

    def transfer(self, coarse_level):
        if coarse_level not in self._transfers:
            self._transfers[coarse_level] = TransferPair(
                self.fe(coarse_level), self.fe(coarse_level + 1))
        return self._transfers[coarse_level]

    def dense_terms(self, level):
        if level not in self._terms:
            log.info("densifying tracking terms on level %d", level)
            self._terms[level] = DenseTrackingTerms.compute(
                self.fe(level), self.system(level))
        return self._terms[level]

    def hessian(self, level, params):
        return HessianOperator(self.fe(level), self.system(level), params)


def build_preconditioner(finest_level, num_levels, params, cache=None,
                         strategy="zero-mean", control_space="full"):
    """Hierarchy with ``num_levels`` grids ending at ``finest_level``.

    One level means no preconditioning; the base grid is the finest grid
    coarsened ``num_levels - 1`` times.
    """
    if num_levels < 1:
        raise ConfigurationError("num_levels must be at least 1")
    base = finest_level - (num_levels - 1)
    if base < 1:
        raise ConfigurationError(
            f"{num_levels} levels from level {finest_level} reach below h=1/2")
    if cache is None:
        cache = LevelCache(strategy, control_space)
    levels = range(base, finest_level + 1)
    fes = [cache.fe(k) for k in levels]
    hessians = [cache.hessian(k, params) for k in levels]
    transfers = [cache.transfer(k) for k in levels[:-1]]
    base_inverse = None
    if num_levels > 1:
        base_matrix = cache.dense_terms(base).combine(params)
        base_inverse = DenseInverse(hessians[0], base_matrix)
    return PrecondHierarchy(fes, hessians, transfers, base_inverse)
