"""
Dense joint-spectrum analysis of the reduced Hessian against the two-grid
operator ``T = H_2h pi + beta (I - pi)``.

Both operators are handled as symmetric bilinear-form matrices::

    B_H = beta M_f + G_h
    B_T = beta M_f + R^T G_2h R,     R = M_f,2h^{-1} P^T M_f,h

so ``B_H - B_T = G_h - R^T G_2h R`` can be formed without cancellation in
``beta``.  On the unit square with the zero-mean pressure constraint every
operator commutes with the two coordinate reflections, and the pencil splits
into four independent blocks (see :func:`symmetry_bases`).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConfigurationError, SolverBreakdown
from .hessian import DENSE_SIZE_LIMIT, DenseTrackingTerms
from .preconditioner import LevelCache
from .stokes import ConstraintStrategy

log = logging.getLogger(__name__)


@dataclass
class SpectralReport:
    level: int
    params: object
    eigenvalues: np.ndarray
    d_h: float
    d_tilde: float
    outliers: int = 0
    ratio_to_previous: float = None
    strategy: str = "zero-mean"
    extra: dict = field(default_factory=dict)

    @property
    def h(self):
        return 2.0 ** -self.level

    def as_row(self):
        return {"level": self.level, "h": self.h, "beta": self.params.beta,
                "gamma_u": self.params.gamma_u,
                "gamma_p": self.params.gamma_p, "strategy": self.strategy,
                "d_h": self.d_h, "d_tilde": self.d_tilde,
                "outliers": self.outliers, "ratio": self.ratio_to_previous}


def spectral_distance(eigenvalues):
    lam = np.asarray(eigenvalues)
    return float(np.max(np.abs(np.log(lam)))) if lam.size else 0.0


def filtered_distance(report, k):
    """Distance after dropping the ``k`` eigenvalues farthest from 1."""
    lam = np.asarray(report.eigenvalues)
    if not 0 <= k < lam.size:
        raise ConfigurationError(
            f"cannot drop {k} of {lam.size} eigenvalues")
    dist = np.sort(np.abs(np.log(lam)))
    return float(dist[lam.size - 1 - k])


def joint_spectrum(B_H, B_T, difference=None, return_vectors=False):
    """Generalized eigenvalues of ``B_H x = lambda B_T x``.

    The pencil ``(B_H - B_T, B_T)`` is solved instead, which resolves
    eigenvalues close to one to full absolute accuracy.
    """
    if difference is None:
        difference = B_H - B_T
    try:
        out = sla.eigh(difference, B_T, eigvals_only=not return_vectors,
                       check_finite=False)
    except sla.LinAlgError as exc:
        raise SolverBreakdown(f"two-grid form is not positive definite: {exc}")
    mu, vecs = (out if return_vectors else (out, None))
    lam = 1.0 + mu
    if np.any(lam <= 0.0):
        raise SolverBreakdown("non-positive generalized eigenvalue")
    return (lam, vecs) if return_vectors else lam


# ---------------------------------------------------------------------------
# reflection symmetry
# ---------------------------------------------------------------------------

def _reflections(mesh):
    """Signed permutations of the full Q2 vector dofs for x -> 1-x, y -> 1-y."""
    k = mesh.nq2_side
    iy, ix = np.divmod(np.arange(mesh.n_q2), k)
    mirror_x = iy * k + (k - 1 - ix)
    mirror_y = (k - 1 - iy) * k + ix
    out = []
    for mirror, flipped in ((mirror_x, 0), (mirror_y, 1)):
        src = np.arange(2 * mesh.n_q2)
        node, comp = np.divmod(src, 2)
        dst = 2 * mirror[node] + comp
        sign = np.where(comp == flipped, -1.0, 1.0)
        out.append((dst, sign))
    return out


def symmetry_bases(fe):
    """Orthonormal bases of the four reflection-symmetry classes of controls.

    Returns a list of sparse ``p x p_k`` matrices whose column spaces are
    mutually orthogonal (in both the Euclidean and the ``M_f`` sense) and
    together span the control space.
    """
    (dx, sx), (dy, sy) = _reflections(fe.mesh)
    full = 2 * fe.mesh.n_q2
    pos = -np.ones(full, dtype=int)
    pos[fe.control] = np.arange(fe.p)
    d = fe.control
    dxy, sxy = dy[dx[d]], sx[d] * sy[dx[d]]
    images = np.stack([d, dx[d], dy[d], dxy])
    signs = np.stack([np.ones(fe.p), sx[d], sy[d], sxy])
    if np.any(pos[images] < 0):
        raise ConfigurationError("control space is not reflection invariant")
    orbit_min = images.min(axis=0)
    reps = np.flatnonzero(orbit_min == d)
    bases = []
    for ex in (1.0, -1.0):
        for ey in (1.0, -1.0):
            chars = np.array([1.0, ex, ey, ex * ey])
            rows = pos[images[:, reps]].ravel()
            cols = np.tile(np.arange(len(reps)), 4)
            vals = (signs[:, reps] * chars[:, None]).ravel()
            V = sp.csc_matrix((vals, (rows, cols)), shape=(fe.p, len(reps)))
            V.sum_duplicates()
            V.eliminate_zeros()
            norms = np.sqrt(np.asarray(V.multiply(V).sum(axis=0)).ravel())
            keep = np.flatnonzero(norms > 0)
            V = V[:, keep] @ sp.diags(1.0 / norms[keep])
            bases.append(V.tocsr())
    return bases


# ---------------------------------------------------------------------------
# two-grid forms
# ---------------------------------------------------------------------------

def two_grid_form(gauss_newton_coarse, restriction, mass, beta):
    """``beta M + R^T G_2h R`` for a dense coarse Gauss-Newton block."""
    return beta * mass + restriction.T @ gauss_newton_coarse @ restriction


def _restriction(cache, coarse_level, basis):
    tp = cache.transfer(coarse_level)
    load = tp.restrict_matrix @ basis
    load = load.toarray() if sp.issparse(load) else np.asarray(load)
    return tp.coarse.mass_solve(load)


def form_two_grid_dense(level, params, cache=None, basis=None,
                        max_size=DENSE_SIZE_LIMIT):
    """Return ``(B_H, B_T, B_H - B_T)`` on ``level`` (compressed by ``basis``)."""
    if level < 2:
        raise ConfigurationError("two-grid analysis needs level >= 2")
    cache = cache or LevelCache()
    fe = cache.fe(level)
    if basis is None:
        basis = sp.identity(fe.p, format="csr")
    fine = DenseTrackingTerms.compute(
        fe, cache.system(level), basis=basis, max_size=max_size,
        need_u=params.gamma_u > 0, need_p=params.gamma_p > 0)
    coarse = cache.dense_terms(level - 1)
    R = _restriction(cache, level - 1, basis)
    G_h = fine.gauss_newton(params)
    G_c = R.T @ coarse.gauss_newton(params) @ R
    diff = G_h - G_c
    diff = 0.5 * (diff + diff.T)
    B_T = params.beta * fine.mass + G_c
    B_T = 0.5 * (B_T + B_T.T)
    B_H = params.beta * fine.mass + G_h
    return B_H, B_T, diff


def two_grid_spectrum(level, params, cache=None, use_symmetry=None,
                      outliers=0, max_size=DENSE_SIZE_LIMIT):
    """Joint spectrum of ``(H_h, T_h)`` on one level as a :class:`SpectralReport`."""
    cache = cache or LevelCache()
    strategy = ConstraintStrategy.parse(cache.strategy)
    if use_symmetry is None:
        use_symmetry = strategy is ConstraintStrategy.ZERO_MEAN
    if use_symmetry and strategy is not ConstraintStrategy.ZERO_MEAN:
        raise ConfigurationError("pinned pressure breaks the reflection "
                                 "symmetry")
    fe = cache.fe(level)
    bases = symmetry_bases(fe) if use_symmetry else [None]
    eigs = []
    for V in bases:
        _, B_T, diff = form_two_grid_dense(level, params, cache, V, max_size)
        eigs.append(joint_spectrum(None, B_T, difference=diff))
    lam = np.sort(np.concatenate(eigs))
    d = spectral_distance(lam)
    report = SpectralReport(level=level, params=params, eigenvalues=lam,
                            d_h=d, d_tilde=d, outliers=outliers,
                            strategy=strategy.value)
    if outliers:
        report.d_tilde = filtered_distance(report, outliers)
    return report


def spectrum_table(levels, params, cache=None, outliers=0, **kwargs):
    cache = cache or LevelCache()
    rows, prev = [], None
    for level in levels:
        rep = two_grid_spectrum(level, params, cache, outliers=outliers,
                                **kwargs)
        if prev is not None and prev.level == level - 1:
            rep.ratio_to_previous = prev.d_tilde / rep.d_tilde
        rows.append(rep)
        prev = rep
    return rows


def spectral_radius_check(level, params, cache=None):
    """Compare ``rho(I - L H)`` with the bound ``e^delta - 1``.

    ``L`` and ``H`` are densified in operator form independently of the
    joint-spectrum route; ``delta`` is the spectral distance from
    :func:`two_grid_spectrum`.  Returns ``(rho, bound, delta)``.
    """
    from .preconditioner import build_preconditioner

    cache = cache or LevelCache()
    fe = cache.fe(level)
    pc = build_preconditioner(level, 2, params, cache)
    eye = np.eye(fe.p)
    H = pc.finest_hessian.apply(eye)
    L = np.column_stack([pc.apply_two_grid(eye[:, j]) for j in range(fe.p)])
    rho = float(np.max(np.abs(np.linalg.eigvals(eye - L @ H))))
    delta = two_grid_spectrum(level, params, cache, use_symmetry=False).d_h
    bound = float(np.expm1(delta))
    return rho, bound, delta
