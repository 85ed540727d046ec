"""Two-level and multilevel BDDC preconditioners on a periodic hierarchy.

Vectors at level ``i`` are indexed by the level-i dofs; broken (substructure)
vectors are arrays of shape ``(n_substructures, n_local, k)``.  All
applications accept a block of ``k`` right-hand sides.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .hierarchy import Hierarchy, Level
from .localsolvers import (
    CoarseBasis,
    ConstrainedNeumannSolver,
    FactorizationError,
    InteriorSolver,
    coarse_basis,
    substructure_stiffness,
)
from .mesh_fe import element_stiffness


def _scatter(gather: np.ndarray, n: int, weights: np.ndarray | None = None) -> sp.csr_matrix:
    """Sparse map from broken vectors (raveled) to global vectors."""
    vals = np.ones(gather.size) if weights is None else weights.ravel()
    cols = np.arange(gather.size)
    return sp.csr_matrix((vals, (gather.ravel(), cols)), shape=(n, gather.size))


def _local_apply(fn, X):
    """Apply a reference-substructure solve to every substructure of X (S, p, k)."""
    S, p, k = X.shape
    Y = fn(X.transpose(1, 0, 2).reshape(p, S * k))
    return Y.reshape(-1, S, k).transpose(1, 0, 2)


class CoarseSolver:
    """Exact solve of the singular periodic coarse operator.

    The constant kernel is removed by a rank-one shift; right-hand sides and
    solutions are projected to zero mean.
    """

    def __init__(self, A: np.ndarray):
        A = np.asarray(A.todense() if sp.issparse(A) else A)
        n = A.shape[0]
        self.n = n
        shift = np.mean(np.diag(A)) if n else 1.0
        try:
            self._cho = sla.cho_factor(A + shift / n * np.ones((n, n)), lower=True)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("coarse operator is singular beyond the constant kernel") from exc

    def solve(self, r: np.ndarray) -> np.ndarray:
        r = r - r.mean(axis=0)
        u = sla.cho_solve(self._cho, r)
        return u - u.mean(axis=0)


@dataclass
class BddcLevel:
    geometry: Level
    K: np.ndarray
    A: sp.csr_matrix
    interior: np.ndarray
    interior_solver: InteriorSolver
    neumann: ConstrainedNeumannSolver
    basis: CoarseBasis
    weights: np.ndarray
    E: sp.csr_matrix
    R: sp.csr_matrix
    Rc: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def n_coarse(self) -> int:
        return self.Rc.shape[0]

    def to_broken(self, u):
        """Copy a continuous vector to every substructure (no weighting)."""
        return u[self.geometry.gather]

    def restrict_dual(self, r):
        """E^T r as a broken functional."""
        S, m = self.geometry.gather.shape
        return (self.E.T @ r).reshape(S, m, -1)

    def average(self, w):
        S, m = self.geometry.gather.shape
        return self.E @ w.reshape(S * m, -1)

    def interior_correction(self, r):
        """u_I with a(u_I, z_I) = <r, z_I>, returned as a global vector."""
        G = self.geometry.gather[:, self.interior]
        loc = _local_apply(self.interior_solver.solve, r[G])
        u = np.zeros_like(r)
        u[G] = loc
        return u

    def harmonic_defect(self, u):
        """P u: interior solve with right-hand side a(u, z_I)."""
        Ku = np.matmul(self.K[self.interior], self.to_broken(u))
        G = self.geometry.gather[:, self.interior]
        v = np.zeros_like(u)
        v[G] = _local_apply(self.interior_solver.solve, Ku)
        return v

    def apply_A_broken(self, w):
        """Assemble K_s w_s from a broken vector into a global functional."""
        Kw = np.matmul(self.K, w)
        S, m = self.geometry.gather.shape
        return self.R @ Kw.reshape(S * m, -1)


def setup_level(geom: Level, elem_matrix: np.ndarray, A: sp.csr_matrix | None = None) -> BddcLevel:
    K = substructure_stiffness(geom.elem_local, elem_matrix, geom.n_local)
    interior = geom.local_interior
    interior_solver = InteriorSolver(K[np.ix_(interior, interior)])
    C = geom.constraints.matrix
    neumann = ConstrainedNeumannSolver(K, C)
    basis = coarse_basis(K, C, neumann)
    mult = geom.multiplicity()
    weights = 1.0 / mult[geom.gather]
    E = _scatter(geom.gather, geom.n, weights)
    R = _scatter(geom.gather, geom.n)
    Rc = _scatter(geom.constraints.gather, geom.constraints.n_global)
    if A is None:
        S = geom.n_substructures
        A = (R @ sp.kron(sp.eye(S), sp.csr_matrix(K)) @ R.T).tocsr()
    return BddcLevel(geom, K, A, interior, interior_solver, neumann, basis, weights, E, R, Rc)


def assemble_coarse(level: BddcLevel) -> sp.csr_matrix:
    """Next-level operator: assembly of S = Psi^T K Psi over substructures."""
    S = level.geometry.n_substructures
    return (level.Rc @ sp.kron(sp.eye(S), sp.csr_matrix(level.basis.S)) @ level.Rc.T).tocsr()


class BddcPreconditioner:
    """Stack of BDDC levels 1..L-1 plus an exact solver for level L."""

    def __init__(self, hierarchy: Hierarchy, levels: list[BddcLevel], coarse: CoarseSolver, coarse_A):
        self.hierarchy = hierarchy
        self.levels = levels
        self.coarse = coarse
        self.coarse_A = coarse_A

    @property
    def n(self) -> int:
        return self.levels[0].n

    @property
    def A(self) -> sp.csr_matrix:
        return self.levels[0].A

    def operator_at(self, i: int):
        """Assembled operator of level i (1..L)."""
        return self.levels[i - 1].A if i <= len(self.levels) else self.coarse_A

    def _apply_level(self, i: int, r: np.ndarray, coarse_solve) -> np.ndarray:
        lvl = self.levels[i]
        u_I = lvl.interior_correction(r)
        # r_B vanishes on interiors up to rounding
        r_B = r - lvl.apply_A_broken(lvl.to_broken(u_I))
        g = lvl.restrict_dual(r_B)
        w_delta = _local_apply(lvl.neumann.solve, g)
        r_next = lvl.Rc @ np.matmul(lvl.basis.psi.T, g).reshape(-1, r.shape[1])
        u_next = coarse_solve(i, r_next)
        c_loc = u_next[lvl.geometry.constraints.gather]
        u_B = lvl.average(w_delta + np.matmul(lvl.basis.psi, c_loc))
        v_I = lvl.harmonic_defect(u_B)
        return u_I + u_B - v_I

    def _recurse(self, i, r_next):
        if i + 1 < len(self.levels):
            return self._apply_level(i + 1, r_next, self._recurse)
        return self.coarse.solve(r_next)

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Multilevel BDDC: r_1 -> u_1."""
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: expected {self.n}, got {r.shape[0]}")
        vec = r.ndim == 1
        u = self._apply_level(0, r[:, None] if vec else r, self._recurse)
        return u[:, 0] if vec else u

    __call__ = apply

    def exact_level2_solver(self) -> CoarseSolver:
        """A fresh exact factorization of the level-2 operator."""
        if len(self.levels) == 1:
            return self.coarse
        return CoarseSolver(self.levels[1].A)

    def apply_two_level(self, r: np.ndarray, exact: CoarseSolver | None = None) -> np.ndarray:
        """Level-1 BDDC with the level-2 problem solved exactly.

        Pass ``exact`` (from :meth:`exact_level2_solver`) to reuse the
        factorization across calls; otherwise it is rebuilt each time.
        """
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: expected {self.n}, got {r.shape[0]}")
        vec = r.ndim == 1
        exact = self.exact_level2_solver() if exact is None else exact
        u = self._apply_level(0, r[:, None] if vec else r, lambda i, rc: exact.solve(rc))
        return u[:, 0] if vec else u

    def as_operator(self, two_level: bool = False) -> LinearOperator:
        if two_level:
            exact = self.exact_level2_solver()

            def fn(r):
                return self.apply_two_level(r, exact)
        else:
            fn = self.apply
        return LinearOperator((self.n, self.n), matvec=fn, matmat=fn, dtype=float)


def setup(hierarchy: Hierarchy, coarse_space: str | None = None, A1: sp.csr_matrix | None = None) -> BddcPreconditioner:
    """Factor every level and the exact coarsest problem."""
    if coarse_space is not None and coarse_space != hierarchy.spec.coarse_space:
        raise ValueError("coarse space is fixed by the hierarchy; rebuild it to change")
    grid = hierarchy.grid
    elem = element_stiffness(grid.dim, grid.h)
    levels = []
    A = A1
    for geom in hierarchy.levels:
        lvl = setup_level(geom, elem, A)
        levels.append(lvl)
        elem = lvl.basis.S
        A = assemble_coarse(lvl)
    coarse_A = A
    return BddcPreconditioner(hierarchy, levels, CoarseSolver(coarse_A), coarse_A)


def apply_two_level(prec: BddcPreconditioner, r: np.ndarray, exact: CoarseSolver | None = None) -> np.ndarray:
    return prec.apply_two_level(r, exact)


def apply_multilevel(prec: BddcPreconditioner, r: np.ndarray) -> np.ndarray:
    return prec.apply(r)


def average(prec: BddcPreconditioner, level: int, broken: np.ndarray) -> np.ndarray:
    """E_i applied to a broken vector of shape (n_substructures, n_local[, k])."""
    lvl = prec.levels[level - 1]
    out = lvl.average(np.asarray(broken, dtype=float)[..., None] if broken.ndim == 2 else broken)
    return out[:, 0] if broken.ndim == 2 else out
