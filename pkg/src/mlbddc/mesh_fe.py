"""Periodic Q1 discretization of the Poisson problem on the unit square/cube.

Nodes are numbered lexicographically with x fastest; index arithmetic wraps
modulo ``cells_per_axis`` on every axis, so the node count is
``cells_per_axis ** dim`` and the assembled operator has the constant vector
as its null space.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
import itertools

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridSpec:
    dim: int
    cells_per_axis: int
    spacing: float | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"unsupported dimension {self.dim}")
        if self.cells_per_axis < 4:
            raise ValueError("cells_per_axis must be at least 4")
        if self.spacing is not None and self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def h(self) -> float:
        return 1.0 / self.cells_per_axis if self.spacing is None else self.spacing

    @property
    def n(self) -> int:
        return self.cells_per_axis ** self.dim


def cell_offsets(dim: int) -> np.ndarray:
    """Local vertex offsets of a unit cell, lexicographic with x fastest."""
    return np.array([[(j >> k) & 1 for k in range(dim)] for j in range(2 ** dim)])


def element_stiffness(dim: int, spacing: float) -> np.ndarray:
    """Exact Q1 Laplace element matrix on a cube of side ``spacing``.

    Built from the 1D stiffness and mass matrices as a sum of Kronecker
    products; the x factor sits last so that x is the fastest local index.
    """
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    h = float(spacing)
    k1 = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    m1 = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0
    K = np.zeros((2 ** dim, 2 ** dim))
    for axis in range(dim):
        # factors ordered (z, y, x) for kron
        factors = [k1 if a == axis else m1 for a in reversed(range(dim))]
        K += reduce(np.kron, factors)
    return K


def node_index(coords: np.ndarray, cells_per_axis: int) -> np.ndarray:
    """Lexicographic (x fastest) index of integer node coordinates, wrapped."""
    coords = np.mod(coords, cells_per_axis)
    strides = cells_per_axis ** np.arange(coords.shape[-1])
    return coords @ strides


def element_connectivity(spec: GridSpec) -> np.ndarray:
    """(n_elements, 2**dim) global node indices of every cell."""
    N = spec.cells_per_axis
    origins = np.array(list(itertools.product(range(N), repeat=spec.dim)))[:, ::-1]
    corners = origins[:, None, :] + cell_offsets(spec.dim)[None, :, :]
    return node_index(corners, N)


def assemble_global(spec: GridSpec) -> sp.csr_matrix:
    """Periodic stiffness matrix A with ``A @ ones == 0``."""
    Ke = element_stiffness(spec.dim, spec.h)
    conn = element_connectivity(spec)
    m = Ke.shape[0]
    rows = np.repeat(conn, m, axis=1).ravel()
    cols = np.tile(conn, (1, m)).ravel()
    vals = np.tile(Ke.ravel(), conn.shape[0])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(spec.n, spec.n)).tocsr()
    A.sum_duplicates()
    return A


def random_zero_mean_rhs(n: int, seed: int) -> np.ndarray:
    """Uniform [-1, 1) entries with the mean projected out."""
    if n < 1:
        raise ValueError("n must be positive")
    b = np.random.default_rng(seed).uniform(-1.0, 1.0, size=n)
    return b - b.mean()
