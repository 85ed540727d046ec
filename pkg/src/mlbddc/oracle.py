"""Dense small-instance verification of BDDC.

Everything here is built from explicit matrices.  :func:`dense_level_one`
re-derives the fine-level substructuring directly from cell coordinates and
support sets, without going through :mod:`mlbddc.hierarchy`, so it can serve
as an independent check of the production preconditioner.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .mesh_fe import element_stiffness

DEFAULT_CAP = 4096


class OracleSizeError(ValueError):
    pass


def materialize(apply_op, n: int, cap: int = DEFAULT_CAP, block: int = 512) -> np.ndarray:
    """Dense matrix whose column j is ``apply_op(e_j)``."""
    if n > cap:
        raise OracleSizeError(f"n = {n} exceeds the oracle cap {cap}")
    out = np.empty((n, n))
    for start in range(0, n, block):
        stop = min(start + block, n)
        E = np.zeros((n, stop - start))
        E[np.arange(start, stop), np.arange(stop - start)] = 1.0
        out[:, start:stop] = np.asarray(apply_op(E)).reshape(n, stop - start)
    return out


def complement_basis(null: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``null`` columns."""
    null = np.atleast_2d(np.asarray(null, dtype=float))
    if null.shape[0] == 1:
        null = null.T
    return sla.null_space(null.T)


def exact_condition(BA: np.ndarray, nullspace: np.ndarray | None = None, tol: float = 1e-8):
    """Eigenvalues of BA on the complement of ``nullspace`` (default: constants).

    Returns ``(lambda_min, lambda_max, kappa)``.
    """
    n = BA.shape[0]
    Z = complement_basis(np.ones(n) if nullspace is None else nullspace)
    ev = np.linalg.eigvals(Z.T @ BA @ Z)
    scale = np.abs(ev).max()
    if np.abs(ev.imag).max() > tol * scale:
        raise ArithmeticError(
            f"complex eigenvalues (imag {np.abs(ev.imag).max():.2e}): preconditioner is not symmetric")
    ev = np.sort(ev.real)
    return float(ev[0]), float(ev[-1]), float(ev[-1] / ev[0])


def spectrum(A: np.ndarray, B: np.ndarray, nullspace: np.ndarray | None = None, sym_tol: float = 1e-9):
    """Sorted eigenvalues of BA on the complement of the null space.

    Uses the symmetric form ``L^T A L`` with ``Z^T B Z = L L^T``.
    """
    n = A.shape[0]
    Z = complement_basis(np.ones(n) if nullspace is None else nullspace)
    Bz = Z.T @ B @ Z
    asym = np.abs(Bz - Bz.T).max() / np.abs(Bz).max()
    if asym > sym_tol:
        raise ArithmeticError(f"preconditioner asymmetry {asym:.2e} exceeds {sym_tol:.0e}")
    L = np.linalg.cholesky(0.5 * (Bz + Bz.T))
    return np.linalg.eigvalsh(L.T @ (Z.T @ A @ Z) @ L)


def _pinv_solve(M, rhs, rtol=1e-10):
    return np.linalg.lstsq(M, rhs, rcond=rtol)[0]


def _energy_minimal(K, C):
    """Columns minimize energy subject to C psi = I (dense bordered solve)."""
    n, m = K.shape[0], C.shape[0]
    M = np.block([[K, C.T], [C, np.zeros((m, m))]])
    rhs = np.vstack([np.zeros((n, m)), np.eye(m)])
    return np.linalg.solve(M, rhs)[:n]


def _a_orthonormal(X, sub, rel=1e-10):
    """a-orthonormal basis of span(X), dropping zero-energy directions."""
    G = sub.energy(X, X)
    lam, V = np.linalg.eigh(0.5 * (G + G.T))
    keep = lam > rel * max(lam.max(), 1e-300)
    return X @ (V[:, keep] / np.sqrt(lam[keep]))


@dataclass
class DenseSubstructuring:
    """Explicit one-level substructuring: broken space, constraints, weights.

    ``gather[s]`` maps the local dofs of substructure s to global dofs, all
    substructures sharing the reference stiffness ``K`` and constraint rows
    ``C``; ``coarse_gather[s]`` numbers the coarse dofs globally.  Broken
    vectors are raveled substructure-major, shape ``(S * m, k)``.
    """

    n: int
    gather: np.ndarray
    K: np.ndarray
    C: np.ndarray
    coarse_gather: np.ndarray
    n_coarse: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        S, m = self.gather.shape
        self.n_sub, self.m = S, m
        self.Nb = S * m
        cols = np.arange(self.Nb)
        self.R = sp.csr_matrix((np.ones(self.Nb), (cols, self.gather.ravel())), shape=(self.Nb, self.n))
        mult = np.bincount(self.gather.ravel(), minlength=self.n).astype(float)
        self.multiplicity = mult
        self.interior = np.flatnonzero(mult == 1)
        self.interface = np.flatnonzero(mult > 1)
        # E: n x Nb weighted assembly
        self.E = sp.csr_matrix((1.0 / mult[self.gather.ravel()], (self.gather.ravel(), cols)),
                               shape=(self.n, self.Nb))
        self.A = np.zeros((self.n, self.n))
        for g in self.gather:
            self.A[np.ix_(g, g)] += self.K
        nc_loc = self.C.shape[0]
        rows = np.arange(S * nc_loc)
        self.Rc = sp.csr_matrix((np.ones(S * nc_loc), (rows, self.coarse_gather.ravel())),
                                shape=(S * nc_loc, self.n_coarse))

    def blockwise(self, M, X):
        """Apply the same local matrix M to every substructure block of X."""
        X = np.asarray(X).reshape(self.n_sub, M.shape[1], -1)
        return np.matmul(M, X).reshape(self.n_sub * M.shape[0], -1)

    def kb(self, X):
        return self.blockwise(self.K, X)

    def energy(self, X, Y):
        return np.asarray(X).T @ self.kb(Y)


def dense_level_one(dim: int, cells: int, ratio: int, coarse_space: str) -> DenseSubstructuring:
    """Fine-level substructuring into cubes of ``ratio`` cells, built from scratch."""
    if cells % ratio:
        raise ValueError("ratio must divide the cell count")
    nsub = cells // ratio
    Ke = element_stiffness(dim, 1.0 / cells)
    local = np.array(list(itertools.product(range(ratio + 1), repeat=dim)))[:, ::-1]
    lindex = {tuple(p): i for i, p in enumerate(local)}
    m = len(local)
    K = np.zeros((m, m))
    for cell in itertools.product(range(ratio), repeat=dim):
        cell = np.array(cell[::-1])
        verts = [lindex[tuple(cell + np.array([(j >> k) & 1 for k in range(dim)]))] for j in range(2 ** dim)]
        K[np.ix_(verts, verts)] += Ke

    # support of every coarse functional, as local indices
    on_bnd = (local == 0) | (local == ratio)
    groups = {}
    for i, p in enumerate(local):
        n_bnd = int(on_bnd[i].sum())
        if n_bnd == 0:
            continue
        sig = tuple(int(v) if b else -1 for v, b in zip(p, on_bnd[i]))
        groups.setdefault((dim - n_bnd, sig), []).append(i)
    want = {"C": 0, "E": 1, "F": 2}
    keys = sorted((k for k in groups if any(want[c] == k[0] for c in coarse_space)), key=lambda k: (k[0], k[1]))
    C = np.zeros((len(keys), m))
    for row, k in enumerate(keys):
        C[row, groups[k]] = 1.0 / len(groups[k])

    subs = np.array(list(itertools.product(range(nsub), repeat=dim)))[:, ::-1]
    strides = cells ** np.arange(dim)
    gather = np.mod(subs[:, None, :] * ratio + local[None, :, :], cells) @ strides
    # shared coarse dofs are identified by their global support set
    coarse_ids = {}
    cg = np.zeros((len(subs), len(keys)), dtype=int)
    for s in range(len(subs)):
        for row, k in enumerate(keys):
            sup = frozenset(gather[s, groups[k]].tolist())
            cg[s, row] = coarse_ids.setdefault(sup, len(coarse_ids))
    return DenseSubstructuring(cells ** dim, gather, K, C, cg, len(coarse_ids),
                               {"dim": dim, "cells": cells, "ratio": ratio, "coarse_space": coarse_space})


def from_bddc_level(level) -> DenseSubstructuring:
    """Dense view of a production level (any level of a multilevel setup)."""
    g = level.geometry
    return DenseSubstructuring(g.n, g.gather, level.K, g.constraints.matrix,
                               g.constraints.gather, g.constraints.n_global, {"level": g.index})


class DenseBddc:
    """Explicit matrices of the original two-level BDDC and its pieces."""

    def __init__(self, sub: DenseSubstructuring):
        self.sub = sub
        A, I = sub.A, sub.interior
        self.A_II_inv = np.linalg.inv(A[np.ix_(I, I)])
        # W-tilde = (coarse-dof-free functions) + (a lifting of shared coarse values);
        # the lifting is the minimum-norm one, not the energy-minimal one
        lift = np.linalg.pinv(sub.C)
        self.T = np.hstack([self.delta_basis(), sub.blockwise(lift, (sub.Rc @ np.eye(sub.n_coarse)))])

    def interior_solve(self, f):
        """J A_II^{-1} J^T f for global functionals f (columns)."""
        out = np.zeros_like(f)
        out[self.sub.interior] = self.A_II_inv @ f[self.sub.interior]
        return out

    def harmonic(self, u):
        """(I - P) u for continuous u."""
        return u - self.interior_solve(self.sub.A @ u)

    def matrix(self) -> np.ndarray:
        """B = J A_II^{-1} J^T + (I-P) E T G^+ T^T E^T (I-P)^T."""
        sub = self.sub
        G = sub.energy(self.T, self.T)
        HE = self.harmonic(sub.E @ self.T)
        n = sub.n
        return self.interior_solve(np.eye(n)) + HE @ np.linalg.pinv(G, rcond=1e-10, hermitian=True) @ HE.T

    # --- operators on the broken space ---------------------------------
    def P_broken(self, W):
        """Energy-orthogonal projection of broken W onto interior functions."""
        sub = self.sub
        return sub.R @ self.interior_solve(sub.R.T @ sub.kb(W))

    def Q(self, W):
        """(I - P) E acting on broken vectors, returned broken."""
        sub = self.sub
        Y = sub.R @ (sub.E @ W)
        return Y - self.P_broken(Y)

    def interior_basis(self):
        sub = self.sub
        J = np.zeros((sub.n, len(sub.interior)))
        J[sub.interior, np.arange(len(sub.interior))] = 1.0
        return sub.R @ J

    def coarse_basis(self) -> np.ndarray:
        sub = self.sub
        psi = _energy_minimal(sub.K, sub.C)
        return sub.blockwise(psi, sub.Rc @ np.eye(sub.n_coarse))

    def delta_basis(self) -> np.ndarray:
        sub = self.sub
        N = sla.null_space(sub.C)
        return sla.block_diag(*([N] * sub.n_sub))


class ReducedBddc:
    """BDDC on the interface (Schur complement) problem, split form.

    u = E_G (w_GD + w_Pi) with w_GD solving constrained local Schur problems
    with zero coarse dofs and w_Pi the energy-minimal coarse correction.
    """

    def __init__(self, sub: DenseSubstructuring, cap: int = DEFAULT_CAP):
        if sub.n > cap:
            raise OracleSizeError(f"n = {sub.n} too large for a dense Schur complement")
        self.sub = sub
        A, I, G = sub.A, sub.interior, sub.interface
        self.gamma = G
        self.S_global = A[np.ix_(G, G)] - A[np.ix_(G, I)] @ np.linalg.solve(A[np.ix_(I, I)], A[np.ix_(I, G)])
        mult = sub.multiplicity
        loc_b = np.flatnonzero(mult[sub.gather[0]] > 1)
        loc_i = np.flatnonzero(mult[sub.gather[0]] == 1)
        K = sub.K
        self.S_loc = K[np.ix_(loc_b, loc_b)] - K[np.ix_(loc_b, loc_i)] @ np.linalg.solve(
            K[np.ix_(loc_i, loc_i)], K[np.ix_(loc_i, loc_b)])
        self.C_loc = sub.C[:, loc_b]
        if np.abs(sub.C[:, loc_i]).max(initial=0.0) > 0:
            raise ValueError("coarse dofs must not depend on interior values")
        pos = {g: k for k, g in enumerate(G)}
        self.gather_b = np.vectorize(pos.get)(sub.gather[:, loc_b])
        nb = len(loc_b)
        self.nb = nb
        w = 1.0 / mult[G][self.gather_b]
        # E_G: broken interface -> interface, weighted
        self.E_G = np.zeros((len(G), sub.n_sub * nb))
        self.E_G[self.gather_b.ravel(), np.arange(sub.n_sub * nb)] = w.ravel()
        m = self.C_loc.shape[0]
        self.saddle = np.block([[self.S_loc, self.C_loc.T], [self.C_loc, np.zeros((m, m))]])
        self.psi = _energy_minimal(self.S_loc, self.C_loc)
        Sc_loc = self.psi.T @ self.S_loc @ self.psi
        Rc = (sub.Rc @ np.eye(sub.n_coarse)).reshape(sub.n_sub, m, -1)
        self.S_coarse = np.einsum("sai,ab,sbj->ij", Rc, Sc_loc, Rc, optimize=True)
        self.Rc = Rc

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Preconditioner on interface functionals (columns of r)."""
        r = np.asarray(r, dtype=float)
        vec = r.ndim == 1
        r = r[:, None] if vec else r
        S, nb, k = self.sub.n_sub, self.nb, r.shape[1]
        g = (self.E_G.T @ r).reshape(S, nb, k)
        m = self.C_loc.shape[0]
        rhs = np.concatenate([g, np.zeros((S, m, k))], axis=1)
        w_delta = np.linalg.solve(self.saddle[None], rhs)[:, :nb]
        rc = np.einsum("sci,bc,sbk->ik", self.Rc, self.psi, g, optimize=True)
        c = _pinv_solve(self.S_coarse, rc)
        w_pi = np.einsum("bc,sci,ik->sbk", self.psi, self.Rc, c, optimize=True)
        u = self.E_G @ (w_delta + w_pi).reshape(S * nb, k)
        return u[:, 0] if vec else u

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(len(self.gamma)))

    def spectrum(self) -> np.ndarray:
        return spectrum(self.S_global, self.matrix())


def drop_unit(ev: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Eigenvalues with those within ``tol`` of one removed."""
    ev = np.sort(np.asarray(ev))
    return ev[np.abs(ev - 1.0) > tol]


def compare_multisets(ev1, ev2, tol: float = 1e-7):
    """(ok, max deviation) for the eigenvalue multisets excluding ones."""
    a, b = drop_unit(ev1, tol), drop_unit(ev2, tol)
    if len(a) != len(b):
        return False, float("inf")
    dev = float(np.abs(a - b).max(initial=0.0))
    return dev <= tol, dev


@dataclass
class AuditReport:
    entries: dict

    @property
    def passed(self) -> bool:
        return all(v for k, v in self.entries.items() if k.endswith("_pass"))

    def to_text(self) -> str:
        lines = []
        for k, v in self.entries.items():
            if isinstance(v, float):
                v = f"{v:.6e}"
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse(text: str) -> dict:
        out = {}
        for line in text.splitlines():
            if "=" not in line:
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            if v in ("True", "False"):
                out[k] = v == "True"
            else:
                try:
                    out[k] = int(v)
                except ValueError:
                    try:
                        out[k] = float(v)
                    except ValueError:
                        out[k] = v
        return out


def audit_multispace_assumptions(sub: DenseSubstructuring, B: np.ndarray | None = None,
                                 tol: float = 1e-9, samples: int = 5, seed: int = 0) -> AuditReport:
    """Check the three-space decomposition behind two-level BDDC.

    Spaces: interior functions, (I-P) of the zero-coarse-dof space, and the
    energy-minimal coarse space; operators I, (I-P)E, (I-P)E.  ``B`` is the
    preconditioner matrix whose exact condition number is compared with the
    measured omega (defaults to the dense oracle matrix).
    """
    ob = DenseBddc(sub)
    V1 = ob.interior_basis()
    V2 = ob.delta_basis()
    V2 = V2 - ob.P_broken(V2)
    V3 = ob.coarse_basis()
    spaces = [_a_orthonormal(V, sub) for V in (V1, V2, V3)]

    ortho = 0.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        ortho = max(ortho, float(np.abs(sub.energy(spaces[i], spaces[j])).max()))

    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((sub.Nb, 100))
    Qp = ob.Q(probes)
    proj = float(np.linalg.norm(ob.Q(Qp) - Qp) / np.linalg.norm(Qp))

    psi = _energy_minimal(sub.K, sub.C)
    unity = 0.0
    for _ in range(samples):
        u = rng.standard_normal((sub.n, 1))
        Ru = sub.R @ u
        u_I = ob.P_broken(Ru)
        # coarse values of u, read from any substructure carrying them
        c = np.zeros((sub.n_coarse, 1))
        c[sub.coarse_gather.ravel()] = sub.blockwise(sub.C, Ru)
        w_pi = sub.blockwise(psi, sub.Rc @ c)
        w_delta = Ru - u_I - w_pi
        recon = u_I + ob.Q(w_delta) + ob.Q(w_pi)
        unity = max(unity, float(np.linalg.norm(recon - Ru) / np.linalg.norm(Ru)))

    omegas = []
    images = []
    for k, V in enumerate(spaces):
        QV = V if k == 0 else ob.Q(V)
        images.append(QV)
        omegas.append(float(np.linalg.eigvalsh(sub.energy(QV, QV)).max()))
    omega_split = max(omegas)
    # images of the delta and coarse spaces need not be a-orthogonal
    img = [_a_orthonormal(X, sub) for X in images[1:]]
    image_cos = float(np.abs(sub.energy(img[0], img[1])).max())

    # single-space form: sup over all of W-tilde of |(I-P)E w|_a^2 / |w|_a^2
    Tw = _a_orthonormal(ob.T, sub)
    QT = ob.Q(Tw)
    omega = max(float(sla.eigh(sub.energy(QT, QT), eigvals_only=True, subset_by_index=[Tw.shape[1] - 1] * 2)[0]), 1.0)

    B = ob.matrix() if B is None else B
    lmin, lmax, kappa = exact_condition(B @ sub.A)
    entries = {
        "n": sub.n,
        "n_substructures": sub.n_sub,
        "orthogonality_defect": ortho,
        "orthogonality_pass": ortho <= tol,
        "projection_defect": proj,
        "projection_pass": proj <= tol,
        "unity_defect": unity,
        "unity_pass": unity <= tol,
        "omega_interior": omegas[0],
        "omega_delta": omegas[1],
        "omega_coarse": omegas[2],
        "omega_split": omega_split,
        "image_cosine_delta_coarse": image_cos,
        "kappa_le_omega_split": kappa <= omega_split + 1e-6,
        "omega": omega,
        "lambda_min": lmin,
        "lambda_max": lmax,
        "kappa": kappa,
        "kappa_le_omega_pass": kappa <= omega + 1e-6,
        "lambda_min_pass": lmin >= 1 - 1e-8,
    }
    return AuditReport(entries)
