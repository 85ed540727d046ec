"""Preconditioned CG on the zero-mean subspace with Lanczos eigenvalue estimates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class DefinitenessError(ArithmeticError):
    pass


@dataclass
class SolveReport:
    iterations: int
    residuals: list[float]
    lambda_min_est: float
    lambda_max_est: float
    converged: bool
    seed: int | None = None
    alphas: list[float] = field(default_factory=list, repr=False)
    betas: list[float] = field(default_factory=list, repr=False)

    @property
    def cond_est(self) -> float:
        return self.lambda_max_est / self.lambda_min_est


def lanczos_matrix(alphas, betas) -> np.ndarray:
    """Tridiagonal Lanczos matrix T_k from the CG step lengths and ratios.

    ``betas[j]`` is the ratio used to form search direction j+1 from j;
    only the first ``len(alphas) - 1`` of them enter T_k.
    """
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)[: len(a) - 1]
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def lanczos_extremes(alphas, betas) -> tuple[float, float]:
    if len(alphas) == 0:
        raise ValueError("need at least one CG iteration")
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)[: len(a) - 1]
    d = 1.0 / a
    d[1:] += b / a[:-1]
    ev = sla.eigvalsh_tridiagonal(d, np.sqrt(b) / a[:-1])
    return float(ev[0]), float(ev[-1])


def _mean_free(v):
    return v - v.mean()


def _identity(v):
    return v


def pcg(applyA, applyB, b, tol: float = 1e-8, maxit: int = 500, x0=None, seed=None, callback=None,
        project: bool = True):
    """Solve ``A x = b`` for zero-mean ``b``; returns ``(x, SolveReport)``.

    Stops on the unpreconditioned residual ``||r_k|| / ||b|| <= tol``.
    Iterates and residuals are re-projected to zero mean every step (turn
    off with ``project=False`` for nonsingular ``A``).  ``callback(k, x)``
    is invoked after each update.
    """
    _zero_mean = _mean_free if project else _identity
    b = _zero_mean(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else _zero_mean(np.array(x0, dtype=float))
    r = b - applyA(x) if x0 is not None else b.copy()
    r = _zero_mean(r)
    history = [np.linalg.norm(r) / bnorm if bnorm > 0 else 0.0]
    alphas, betas = [], []
    if bnorm == 0.0:
        return x, SolveReport(0, history, 1.0, 1.0, True, seed)

    z = applyB(r)
    rz = float(r @ z)
    if rz <= 0:
        raise DefinitenessError(f"<r, Br> = {rz:.3e} is not positive")
    p = _zero_mean(z)
    converged = False
    for k in range(1, maxit + 1):
        q = applyA(p)
        pq = float(p @ q)
        if pq <= 0:
            raise DefinitenessError(f"<p, Ap> = {pq:.3e} is not positive at iteration {k}")
        alpha = rz / pq
        alphas.append(alpha)
        x = _zero_mean(x + alpha * p)
        r = _zero_mean(r - alpha * q)
        if callback is not None:
            callback(k, x)
        res = np.linalg.norm(r) / bnorm
        history.append(float(res))
        if res <= tol:
            converged = True
            break
        z = applyB(r)
        rz_new = float(r @ z)
        if rz_new <= 0:
            raise DefinitenessError(f"<r, Br> = {rz_new:.3e} is not positive at iteration {k}")
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = _zero_mean(z + beta * p)
    lo, hi = lanczos_extremes(alphas, betas)
    return x, SolveReport(len(alphas), history, lo, hi, converged, seed, alphas, betas)
