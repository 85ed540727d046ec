import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlbddc.localsolvers import (
    ConstrainedNeumannSolver,
    FactorizationError,
    InteriorSolver,
    coarse_basis,
    solve_constrained_neumann,
)

from conftest import cached_setup


def reference(dim=2, cs="CE"):
    lvl = cached_setup(dim, 2, 3, cs)[1].levels[0]
    return lvl.K, lvl.geometry.constraints.matrix, lvl.interior


@pytest.mark.parametrize("dim,cs", [(2, "C"), (2, "CE"), (3, "E"), (3, "CEF")])
def test_neumann_matches_dense_saddle(dim, cs, rng):
    K, C, _ = reference(dim, cs)
    n, m = K.shape[0], C.shape[0]
    g = rng.standard_normal((n, 3))
    c = rng.standard_normal((m, 3))
    M = np.block([[K, C.T], [C, np.zeros((m, m))]])
    ref = np.linalg.solve(M, np.vstack([g, c]))
    w, lam = ConstrainedNeumannSolver(K, C).solve_full(g, c)
    np.testing.assert_allclose(w, ref[:n], atol=1e-10)
    np.testing.assert_allclose(lam, ref[n:], atol=1e-10)


def test_neumann_zero_coarse_dofs(rng):
    K, C, _ = reference()
    slv = ConstrainedNeumannSolver(K, C)
    g = rng.standard_normal(K.shape[0])
    w = solve_constrained_neumann(slv, g)
    assert w.shape == g.shape
    np.testing.assert_allclose(C @ w, 0, atol=1e-12)
    # stationarity: residual lies in range(C^T)
    res = g - K @ w
    lam = np.linalg.lstsq(C.T, res, rcond=None)[0]
    np.testing.assert_allclose(C.T @ lam, res, atol=1e-10)


def test_interior_solver(rng):
    K, _, I = reference()
    KII = K[np.ix_(I, I)]
    b = rng.standard_normal((len(I), 2))
    np.testing.assert_allclose(InteriorSolver(KII).solve(b), np.linalg.solve(KII, b), atol=1e-12)


def test_floating_substructure_rejected():
    K, _, _ = reference()
    with pytest.raises(FactorizationError):
        ConstrainedNeumannSolver(K, np.zeros((0, K.shape[0])))
    with pytest.raises(FactorizationError):
        InteriorSolver(K)


@pytest.mark.parametrize("dim,cs", [(2, "C"), (2, "CE"), (3, "CEF")])
def test_coarse_basis_properties(dim, cs):
    K, C, _ = reference(dim, cs)
    cb = coarse_basis(K, C)
    np.testing.assert_allclose(C @ cb.psi, np.eye(C.shape[0]), atol=1e-12)
    np.testing.assert_allclose(cb.S.sum(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(cb.S, cb.S.T)
    # energy-orthogonal to the zero-coarse-dof space
    N = np.linalg.svd(C)[2][C.shape[0]:].T
    np.testing.assert_allclose(cb.psi.T @ K @ N, 0, atol=1e-11)


def test_coarse_basis_matches_constrained_minimisation():
    """Energy minimisation over {w : C w = e_j} via an explicit null-space parametrisation."""
    K, C, _ = reference(2, "CE")
    m = C.shape[0]
    w0 = np.linalg.pinv(C)
    N = np.linalg.svd(C)[2][m:].T
    z = -np.linalg.solve(N.T @ K @ N, N.T @ K @ w0)
    psi_ref = w0 + N @ z
    cb = coarse_basis(K, C)
    np.testing.assert_allclose(cb.psi, psi_ref, atol=1e-10)
    np.testing.assert_allclose(cb.S, psi_ref.T @ K @ psi_ref, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_coarse_basis_minimal(seed):
    K, C, _ = reference(2, "C")
    cb = coarse_basis(K, C)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(C.shape[0])
    z = rng.standard_normal(K.shape[0])
    z -= np.linalg.pinv(C) @ (C @ z)
    base = cb.psi @ c
    assert (base + z) @ K @ (base + z) >= base @ K @ base - 1e-12
