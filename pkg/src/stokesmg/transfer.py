"""Embedding of coarse Q2 controls into the next finer level and its L2 adjoint."""

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .discretization import lagrange_1d
from .errors import ContractViolation


def q2_prolongation_1d(n_coarse):
    """Nodal interpolation of 1-d Q2 functions from ``n_coarse`` cells to twice as many."""
    n_fine_nodes = 4 * n_coarse + 1
    i = np.arange(n_fine_nodes)
    elem = np.minimum(i // 4, n_coarse - 1)
    xi = (i - 4 * elem) / 4.0
    vals, _ = lagrange_1d(2, xi)
    rows = np.repeat(i, 3)
    cols = (2 * elem[:, None] + np.arange(3)).ravel()
    mat = sp.csr_matrix((vals.ravel(), (rows, cols)),
                        shape=(n_fine_nodes, 2 * n_coarse + 1))
    mat.eliminate_zeros()
    return mat


class TransferPair:
    """Prolongation ``V_2h -> V_h`` and the L2-orthogonal projection back.

    Both act on control coefficient vectors of the two levels' ``FeMatrices``.
    """

    def __init__(self, fe_coarse, fe_fine):
        if fe_fine.mesh.level != fe_coarse.mesh.level + 1:
            raise ContractViolation("transfer needs consecutive levels")
        if fe_fine.control_space != fe_coarse.control_space:
            raise ContractViolation("control spaces differ between levels")
        self.coarse = fe_coarse
        self.fine = fe_fine
        p1 = q2_prolongation_1d(fe_coarse.mesh.ncells)
        nodal = sp.kron(p1, p1, format="csr")
        full = sp.kron(nodal, sp.identity(2), format="csr")
        self.prolong_matrix = full[fe_fine.control][:, fe_coarse.control].tocsr()
        self.prolong_matrix.eliminate_zeros()

    @cached_property
    def restrict_matrix(self):
        """``P^T M_f^h``: coarse-space load of a fine function."""
        return (self.prolong_matrix.T @ self.fine.M_f).tocsr()

    def prolong(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape[0] != self.coarse.p:
            raise ContractViolation(
                f"coarse vector has {c.shape[0]} rows, expected {self.coarse.p}")
        return self.prolong_matrix @ c

    def project_to_coarse(self, f):
        """Coefficients of the L2 projection of a fine control onto V_2h."""
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.fine.p:
            raise ContractViolation(
                f"fine vector has {f.shape[0]} rows, expected {self.fine.p}")
        return self.coarse.mass_solve(self.restrict_matrix @ f)

    def projector(self, f):
        """``Pi f``: the projection expressed on the fine level."""
        return self.prolong(self.project_to_coarse(f))
