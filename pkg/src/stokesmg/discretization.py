"""
Nested uniform quadrilateral meshes of the unit square and Q2-Q1 Taylor-Hood
assembly.

Degrees of freedom are numbered lexicographically: Q2 node ``(ix, iy)`` has
index ``iy * (2N + 1) + ix`` on a mesh with ``N = 1/h`` cells per side, and
the velocity/control component ``c`` of that node has index ``2 * node + c``.
Q1 pressure nodes are numbered ``iy * (N + 1) + ix``.

Velocity states live on the interior Q2 dofs (``n`` of them); controls live on
all Q2 dofs (``p = 2 (2N + 1)^2``) unless the ``interior`` control space is
requested.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError

MAX_LEVEL = 8
CONTROL_SPACES = ("full", "interior")


# ---------------------------------------------------------------------------
# reference element
# ---------------------------------------------------------------------------

def gauss_rule(npts):
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def lagrange_1d(degree, x):
    x = np.asarray(x, dtype=float)
    if degree == 1:
        val = np.stack([1.0 - x, x], axis=-1)
        der = np.stack([-np.ones_like(x), np.ones_like(x)], axis=-1)
    elif degree == 2:
        val = np.stack([2.0 * (x - 0.5) * (x - 1.0),
                        -4.0 * x * (x - 1.0),
                        2.0 * x * (x - 0.5)], axis=-1)
        der = np.stack([4.0 * x - 3.0, -8.0 * x + 4.0, 4.0 * x - 1.0],
                       axis=-1)
    else:
        raise ValueError(degree)
    return val, der


def reference_basis(degree, xi, eta):
    """Tensor Lagrange basis on the unit reference square.

    Returns ``(phi, dphi_dxi, dphi_deta)``, each of shape
    ``(npoints, (degree + 1)**2)``; local node ``(a, b)`` is column
    ``b * (degree + 1) + a``.
    """
    vx, dx = lagrange_1d(degree, xi)
    vy, dy = lagrange_1d(degree, eta)
    phi = (vy[:, :, None] * vx[:, None, :]).reshape(len(xi), -1)
    dxi = (vy[:, :, None] * dx[:, None, :]).reshape(len(xi), -1)
    deta = (dy[:, :, None] * vx[:, None, :]).reshape(len(xi), -1)
    return phi, dxi, deta


def reference_quadrature(npts):
    """Tensor Gauss rule on the reference square: ``(xi, eta, weights)``."""
    g, w = gauss_rule(npts)
    xi = np.tile(g, npts)
    eta = np.repeat(g, npts)
    return xi, eta, np.outer(w, w).ravel()


# ---------------------------------------------------------------------------
# meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshLevel:
    level: int

    @property
    def h(self):
        return Fraction(1, 2 ** self.level)

    @property
    def ncells(self):
        """Cells per side."""
        return 2 ** self.level

    @property
    def n_elements(self):
        return self.ncells ** 2

    @property
    def nq2_side(self):
        return 2 * self.ncells + 1

    @property
    def nq1_side(self):
        return self.ncells + 1

    @property
    def n_q2(self):
        return self.nq2_side ** 2

    @property
    def n_q1(self):
        return self.nq1_side ** 2

    @cached_property
    def q2_coords(self):
        t = np.linspace(0.0, 1.0, self.nq2_side)
        x, y = np.meshgrid(t, t)
        return np.column_stack([x.ravel(), y.ravel()])

    @cached_property
    def q1_coords(self):
        t = np.linspace(0.0, 1.0, self.nq1_side)
        x, y = np.meshgrid(t, t)
        return np.column_stack([x.ravel(), y.ravel()])

    @cached_property
    def q2_boundary(self):
        k = self.nq2_side
        ix, iy = np.meshgrid(np.arange(k), np.arange(k))
        return ((ix == 0) | (ix == k - 1) | (iy == 0) | (iy == k - 1)).ravel()

    @cached_property
    def element_origin(self):
        """Lower-left corner of every element, shape ``(n_elements, 2)``."""
        N = self.ncells
        ex, ey = np.meshgrid(np.arange(N), np.arange(N))
        return np.column_stack([ex.ravel(), ey.ravel()]) / N

    @cached_property
    def elements_q2(self):
        N, k = self.ncells, self.nq2_side
        ex, ey = np.meshgrid(np.arange(N), np.arange(N))
        ex, ey = ex.ravel(), ey.ravel()
        a = np.tile(np.arange(3), 3)
        b = np.repeat(np.arange(3), 3)
        return (2 * ey[:, None] + b) * k + 2 * ex[:, None] + a

    @cached_property
    def elements_q1(self):
        N, k = self.ncells, self.nq1_side
        ex, ey = np.meshgrid(np.arange(N), np.arange(N))
        ex, ey = ex.ravel(), ey.ravel()
        a = np.tile(np.arange(2), 2)
        b = np.repeat(np.arange(2), 2)
        return (ey[:, None] + b) * k + ex[:, None] + a

    @cached_property
    def interior_velocity_dofs(self):
        nodes = np.flatnonzero(~self.q2_boundary)
        return np.column_stack([2 * nodes, 2 * nodes + 1]).ravel()

    def control_dofs(self, control_space="full"):
        if control_space == "full":
            return np.arange(2 * self.n_q2)
        if control_space == "interior":
            return self.interior_velocity_dofs
        raise ConfigurationError(f"unknown control space {control_space!r}")

    def quadrature_points(self, npts):
        """Physical quadrature points ``(n_elements, nq, 2)`` and weights."""
        xi, eta, w = reference_quadrature(npts)
        h = 1.0 / self.ncells
        ref = np.column_stack([xi, eta])
        pts = self.element_origin[:, None, :] + h * ref[None, :, :]
        return pts, w * h * h


@dataclass(frozen=True)
class MeshHierarchy:
    levels: tuple

    def __getitem__(self, i):
        return self.levels[i]

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    @property
    def finest(self):
        return self.levels[-1]

    @property
    def coarsest(self):
        return self.levels[0]


def build_hierarchy(coarsest_level, finest_level):
    """Nested uniform meshes with ``h = 2**-k`` for k in the given range."""
    if not (1 <= coarsest_level <= finest_level <= MAX_LEVEL):
        raise ConfigurationError(
            f"need 1 <= coarsest <= finest <= {MAX_LEVEL}, got "
            f"({coarsest_level}, {finest_level})")
    return MeshHierarchy(tuple(MeshLevel(k) for k in
                               range(coarsest_level, finest_level + 1)))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _local_matrices(npts):
    xi, eta, w = reference_quadrature(npts)
    p2, d2x, d2y = reference_basis(2, xi, eta)
    p1, _, _ = reference_basis(1, xi, eta)
    mass2 = (p2 * w[:, None]).T @ p2
    stiff2 = (d2x * w[:, None]).T @ d2x + (d2y * w[:, None]).T @ d2y
    mass1 = (p1 * w[:, None]).T @ p1
    # -int psi d(phi)/dxi on the reference square
    divx = -(p1 * w[:, None]).T @ d2x
    divy = -(p1 * w[:, None]).T @ d2y
    return mass2, stiff2, mass1, divx, divy


def _scatter(rows_conn, cols_conn, local, shape):
    nel, nr = rows_conn.shape
    nc = cols_conn.shape[1]
    r = np.repeat(rows_conn, nc, axis=1).ravel()
    c = np.tile(cols_conn, (1, nr)).ravel()
    v = np.tile(local.ravel(), nel)
    mat = sp.coo_matrix((v, (r, c)), shape=shape).tocsr()
    mat.sum_duplicates()
    return mat


def _interleave(scalar):
    return sp.kron(scalar, sp.identity(2), format="csr")


@dataclass(frozen=True, eq=False)
class FeMatrices:
    """Assembled Taylor-Hood matrices on one mesh level.

    ``A`` and ``B`` act on interior velocity dofs; ``M_f`` is the mass matrix
    of the control space, ``M_uf`` its rows at interior velocity dofs and
    ``M_u`` the interior principal block.
    """

    mesh: MeshLevel
    A: sp.csr_matrix
    B: sp.csr_matrix
    M_f: sp.csr_matrix
    M_uf: sp.csr_matrix
    M_u: sp.csr_matrix
    M_p: sp.csr_matrix
    mean_vector: np.ndarray
    mass_q2: sp.csr_matrix
    control_space: str = "full"
    interior: np.ndarray = field(repr=False, default=None)
    control: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.M_p.shape[0]

    @property
    def p(self):
        return self.M_f.shape[0]

    @cached_property
    def _mass_lu(self):
        return spla.splu(self.M_f.tocsc(), permc_spec="MMD_AT_PLUS_A")

    @cached_property
    def _mass_p_lu(self):
        return spla.splu(self.M_p.tocsc(), permc_spec="MMD_AT_PLUS_A")

    @cached_property
    def _mass_v_lu(self):
        return spla.splu(self.mass_q2.tocsc(), permc_spec="MMD_AT_PLUS_A")

    def mass_solve(self, rhs):
        """Apply ``M_f^{-1}`` to a vector or to the columns of a 2-d array."""
        return self._mass_lu.solve(np.asarray(rhs, dtype=float))

    def inner(self, x, y):
        """Control-space L2 inner product ``x^T M_f y``."""
        return float(x @ (self.M_f @ y))

    def norm(self, x):
        return np.sqrt(self.inner(x, x))

    def export(self, name, path):
        """Write one assembled matrix in Matrix Market coordinate format."""
        mat = getattr(self, name)
        scipy.io.mmwrite(str(path), sp.coo_matrix(mat), precision=17,
                         symmetry="general")


def assemble(mesh, control_space="full", quadrature=3):
    """Assemble all Taylor-Hood and control matrices on ``mesh``."""
    if control_space not in CONTROL_SPACES:
        raise ConfigurationError(f"unknown control space {control_space!r}")
    h = 1.0 / mesh.ncells
    mass2, stiff2, mass1, divx, divy = _local_matrices(quadrature)
    e2, e1 = mesh.elements_q2, mesh.elements_q1
    nq2, nq1 = mesh.n_q2, mesh.n_q1

    ms = _scatter(e2, e2, h * h * mass2, (nq2, nq2))
    ks = _scatter(e2, e2, stiff2, (nq2, nq2))
    mp = _scatter(e1, e1, h * h * mass1, (nq1, nq1))
    bx = _scatter(e1, e2, h * divx, (nq1, nq2))
    by = _scatter(e1, e2, h * divy, (nq1, nq2))

    b_full = sp.hstack([bx, by]).tocsr()
    # reorder columns from component-blocked to node-interleaved
    order = np.empty(2 * nq2, dtype=int)
    order[0::2] = np.arange(nq2)
    order[1::2] = nq2 + np.arange(nq2)
    b_full = b_full[:, order]

    m_full = _interleave(ms)
    a_full = _interleave(ks)
    interior = mesh.interior_velocity_dofs
    control = mesh.control_dofs(control_space)

    A = a_full[interior][:, interior].tocsr()
    B = b_full[:, interior].tocsr()
    M_f = m_full[control][:, control].tocsr()
    M_uf = m_full[interior][:, control].tocsr()
    M_u = m_full[interior][:, interior].tocsr()
    mean_vector = np.asarray(mp.sum(axis=1)).ravel()
    return FeMatrices(mesh=mesh, A=A, B=B, M_f=M_f, M_uf=M_uf, M_u=M_u,
                      M_p=mp, mean_vector=mean_vector, mass_q2=ms,
                      control_space=control_space, interior=interior,
                      control=control)


# ---------------------------------------------------------------------------
# quadrature-based evaluation and L2 projection
# ---------------------------------------------------------------------------

def _ref_values(degree, npts):
    xi, eta, _ = reference_quadrature(npts)
    return reference_basis(degree, xi, eta)[0]


def evaluate_q2(mesh, coeffs, npts=5):
    """Values of a Q2 vector field (length ``2 n_q2``) at quadrature points.

    Returns an array of shape ``(n_elements, nq, 2)``.
    """
    c = np.asarray(coeffs).reshape(-1, 2)
    phi = _ref_values(2, npts)
    local = c[mesh.elements_q2]                       # (nel, 9, 2)
    return np.einsum("qa,eac->eqc", phi, local)


def evaluate_q1(mesh, coeffs, npts=5):
    phi = _ref_values(1, npts)
    return np.asarray(coeffs)[mesh.elements_q1] @ phi.T


def _sample_vector(function, pts):
    u = function(pts[..., 0], pts[..., 1])
    return np.stack([np.broadcast_to(u[0], pts.shape[:-1]),
                     np.broadcast_to(u[1], pts.shape[:-1])], axis=-1)


def _sample_scalar(function, pts):
    return np.broadcast_to(function(pts[..., 0], pts[..., 1]),
                           pts.shape[:-1])


def velocity_load(mesh, function, npts=5):
    """``(u, phi_i)`` for every Q2 vector basis function, length ``2 n_q2``."""
    pts, w = mesh.quadrature_points(npts)
    vals = _sample_vector(function, pts) * w[None, :, None]
    phi = _ref_values(2, npts)
    local = np.einsum("qa,eqc->eac", phi, vals)
    out = np.zeros((mesh.n_q2, 2))
    np.add.at(out, mesh.elements_q2, local)
    return out.ravel()


def pressure_load(mesh, function, npts=5):
    pts, w = mesh.quadrature_points(npts)
    vals = _sample_scalar(function, pts) * w[None, :]
    phi = _ref_values(1, npts)
    out = np.zeros(mesh.n_q1)
    np.add.at(out, mesh.elements_q1, vals @ phi)
    return out


def l2_project_velocity(fe, function, npts=5):
    """L2 projection of a vector field onto the full Q2 space V_h.

    ``function(x, y)`` returns the pair of components.  The result always has
    length ``2 n_q2``, whatever control space ``fe`` was assembled with.
    """
    load = velocity_load(fe.mesh, function, npts).reshape(-1, 2)
    return fe._mass_v_lu.solve(load).ravel()


def l2_project_pressure(fe, function, npts=5):
    """L2 projection onto the zero-mean Q1 space M_h."""
    q = fe._mass_p_lu.solve(pressure_load(fe.mesh, function, npts))
    return q - (fe.mean_vector @ q) / fe.mean_vector.sum()


def l2_error_velocity(mesh, coeffs, function, npts=5):
    """Continuous L2 norm of ``u_h - u`` for a full-length Q2 coefficient vector."""
    pts, w = mesh.quadrature_points(npts)
    diff = evaluate_q2(mesh, coeffs, npts) - _sample_vector(function, pts)
    return np.sqrt(np.sum(w[None, :, None] * diff ** 2))


def l2_error_pressure(mesh, coeffs, function, npts=5):
    pts, w = mesh.quadrature_points(npts)
    diff = evaluate_q1(mesh, coeffs, npts) - _sample_scalar(function, pts)
    return np.sqrt(np.sum(w[None, :] * diff ** 2))


def l2_norm_function(mesh, function, npts=5, vector=True):
    pts, w = mesh.quadrature_points(npts)
    if vector:
        vals = _sample_vector(function, pts)
        return np.sqrt(np.sum(w[None, :, None] * vals ** 2))
    vals = _sample_scalar(function, pts)
    return np.sqrt(np.sum(w[None, :] * vals ** 2))


def interior_to_full(fe, u):
    """Embed an interior velocity vector (zero boundary trace) into V_h."""
    out = np.zeros(2 * fe.mesh.n_q2)
    out[fe.interior] = u
    return out


def control_to_full(fe, f):
    out = np.zeros(2 * fe.mesh.n_q2)
    out[fe.control] = f
    return out


# ---------------------------------------------------------------------------
# target data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetData:
    """Analytic targets with their discrete projections on one level.

    ``u_full`` is the L2 projection of the target velocity onto V_h (length
    ``2 n_q2``); ``p`` is the projection of the target pressure onto M_h.
    ``u_load`` holds ``(u_d, phi_i)`` for interior velocity basis functions,
    which equals ``M_uf`` times the projection coefficients.
    """

    u_d: object
    p_d: object
    u_full: np.ndarray
    p: np.ndarray
    u_load: np.ndarray
    has_velocity: bool = True
    has_pressure: bool = True

    @classmethod
    def project(cls, fe, u_d=None, p_d=None, npts=5):
        if u_d is None:
            u_full = np.zeros(2 * fe.mesh.n_q2)
            u_load = np.zeros(fe.n)
        else:
            load = velocity_load(fe.mesh, u_d, npts)
            u_full = fe._mass_v_lu.solve(load.reshape(-1, 2)).ravel()
            u_load = load[fe.interior]
        p = (np.zeros(fe.m) if p_d is None
             else l2_project_pressure(fe, p_d, npts))
        return cls(u_d=u_d, p_d=p_d, u_full=u_full, p=p, u_load=u_load,
                   has_velocity=u_d is not None, has_pressure=p_d is not None)

    @classmethod
    def from_coefficients(cls, fe, u_full, p):
        """Targets already given as discrete coefficients on this level."""
        u_full = np.asarray(u_full, dtype=float)
        load = (fe.mass_q2 @ u_full.reshape(-1, 2)).ravel()
        p = np.asarray(p, dtype=float)
        p = p - (fe.mean_vector @ p) / fe.mean_vector.sum()
        return cls(u_d=None, p_d=None, u_full=u_full, p=p,
                   u_load=load[fe.interior])
