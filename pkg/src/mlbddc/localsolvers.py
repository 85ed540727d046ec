"""Factorized per-substructure solvers.

Because every substructure of a level is congruent, one factorization of the
reference substructure serves all of them; solves take a block of
right-hand sides with one column per substructure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class FactorizationError(RuntimeError):
    pass


def substructure_stiffness(elem_local: np.ndarray, elem_matrix: np.ndarray, n_local: int) -> np.ndarray:
    """Sum the element matrices of one substructure into its local numbering."""
    K = np.zeros((n_local, n_local))
    for idx in elem_local:
        K[np.ix_(idx, idx)] += elem_matrix
    return 0.5 * (K + K.T)


class InteriorSolver:
    """Cholesky factor of the interior (Dirichlet) block ``K_II``."""

    def __init__(self, K_II: np.ndarray):
        try:
            self._cho = sla.cho_factor(K_II, lower=True)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                "interior block is not positive definite; check the dof classification") from exc
        self.n = K_II.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.n == 0:
            return np.zeros_like(rhs)
        return sla.cho_solve(self._cho, rhs)


def factor_interior(K_II: np.ndarray) -> InteriorSolver:
    return InteriorSolver(K_II)


class ConstrainedNeumannSolver:
    """Symmetric indefinite LDL^T factorization of ``[[K, C^T], [C, 0]]``.

    The inertia of ``D`` must be (n positive, m negative, 0 zero); anything
    else means ``K`` is not positive definite on ``ker C`` or ``C`` is rank
    deficient.
    """

    def __init__(self, K: np.ndarray, C: np.ndarray):
        n, m = K.shape[0], C.shape[0]
        self.n, self.m = n, m
        bordered = np.block([[K, C.T], [C, np.zeros((m, m))]])
        lu, d, perm = sla.ldl(bordered, lower=True)
        self._tri = lu[perm]
        self._perm = perm
        self._d_banded = np.zeros((3, n + m))
        self._d_banded[0, 1:] = np.diag(d, 1)
        self._d_banded[1] = np.diag(d)
        self._d_banded[2, :-1] = np.diag(d, -1)
        eig = np.linalg.eigvalsh(d)
        scale = max(np.abs(eig).max(), 1.0)
        n_pos = int(np.sum(eig > 1e-12 * scale))
        n_neg = int(np.sum(eig < -1e-12 * scale))
        if (n_pos, n_neg) != (n, m):
            raise FactorizationError(
                f"constrained Neumann matrix has inertia ({n_pos}, {n_neg}, {n + m - n_pos - n_neg}), "
                f"expected ({n}, {m}, 0): stiffness not positive definite on the constraint kernel")

    def solve_full(self, g: np.ndarray, c: np.ndarray | None = None):
        """Return ``(w, lam)`` with ``K w + C^T lam = g`` and ``C w = c``."""
        g = np.asarray(g, dtype=float)
        vec = g.ndim == 1
        g2 = g[:, None] if vec else g
        c2 = np.zeros((self.m, g2.shape[1])) if c is None else np.asarray(c, float).reshape(self.m, -1)
        rhs = np.vstack([g2, c2])
        y = sla.solve_triangular(self._tri, rhs[self._perm], lower=True, unit_diagonal=True)
        v = sla.solve_banded((1, 1), self._d_banded, y)
        x = np.empty_like(v)
        x[self._perm] = sla.solve_triangular(self._tri.T, v, lower=False, unit_diagonal=True)
        w, lam = x[: self.n], x[self.n:]
        if vec:
            return w[:, 0], lam[:, 0]
        return w, lam

    def solve(self, g: np.ndarray) -> np.ndarray:
        return self.solve_full(g)[0]


def solve_constrained_neumann(slv: ConstrainedNeumannSolver, g: np.ndarray) -> np.ndarray:
    return slv.solve(g)


@dataclass
class CoarseBasis:
    psi: np.ndarray
    S: np.ndarray


def coarse_basis(K: np.ndarray, C: np.ndarray, solver: ConstrainedNeumannSolver | None = None) -> CoarseBasis:
    """Energy-minimal functions with unit value in exactly one coarse dof."""
    solver = ConstrainedNeumannSolver(K, C) if solver is None else solver
    m = C.shape[0]
    psi, _ = solver.solve_full(np.zeros((K.shape[0], m)), np.eye(m))
    S = psi.T @ K @ psi
    return CoarseBasis(psi, 0.5 * (S + S.T))
