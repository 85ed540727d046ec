"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as a script
(``python tests/test_acceptance.py``) for a plain summary.
"""
from __future__ import annotations

import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import cached_setup  # noqa: E402
from mlbddc.bench import RunConfig, run  # noqa: E402
from mlbddc.krylov import pcg  # noqa: E402
from mlbddc.mesh_fe import element_stiffness, random_zero_mean_rhs  # noqa: E402
from mlbddc.oracle import (  # noqa: E402
    DenseBddc,
    ReducedBddc,
    audit_multispace_assumptions,
    compare_multisets,
    dense_level_one,
    materialize,
    spectrum,
)


@lru_cache(maxsize=None)
def row(dim, levels, ratio, cs):
    return run(RunConfig(dim=dim, levels=levels, ratio=ratio, coarse_space=cs))


def table_check(cases):
    """cases: (dim, L, r, cs, iter_ref or None, iter_tol, cond_ref)."""
    ok, lines = True, []
    for dim, L, r, cs, it, it_tol, cond in cases:
        res = row(dim, L, r, cs)
        good = res.converged and abs(res.cond_est - cond) <= 0.1 * cond
        if it is not None:
            good &= abs(res.iter - it) <= it_tol
        ok &= good
        lines.append(f"{dim}D L={L} r={r} {cs}: iter {res.iter} (ref {it}), cond {res.cond_est:.4g} (ref {cond})")
    return ok, "; ".join(lines)


def criterion_1():
    return table_check([
        (2, 2, 3, "C", 8, 2, 1.92),
        (2, 2, 3, "CE", 5, 2, 1.08),
        (2, 3, 3, "C", 13, 2, 3.10),
        (2, 3, 3, "CE", 7, 2, 1.34),
        (2, 4, 3, "C", 17, 3, 5.31),
    ])


def criterion_2():
    return table_check([
        (2, 2, 4, "C", None, 0, 2.20),
        (2, 3, 4, "C", None, 0, 4.02),
        (2, 3, 4, "CE", None, 0, 1.51),
    ])


def criterion_3():
    return table_check([
        (3, 2, 3, "E", 10, 2, 1.85),
        (3, 2, 3, "CE", None, 0, 1.47),
        (3, 2, 3, "CEF", 5, 2, 1.08),
        (3, 3, 3, "E", None, 0, 3.02),
        (3, 3, 3, "CEF", None, 0, 1.50),
    ])


ORACLE_CASES = [
    (2, 2, 3, "C"), (2, 2, 3, "CE"), (2, 2, 4, "C"), (2, 2, 4, "CE"),
    (2, 3, 3, "C"), (2, 3, 3, "CE"),
    (3, 2, 3, "E"), (3, 2, 3, "CE"), (3, 2, 3, "CEF"),
]


def criterion_4():
    ok, worst_rel, worst_lmin = True, 0.0, np.inf
    for case in ORACLE_CASES:
        hier, prec = cached_setup(*case)
        assert hier.n <= 1728
        ev = spectrum(prec.A.toarray(), materialize(prec.apply, prec.n))
        kappa = ev[-1] / ev[0]
        rel = abs(row(*case).cond_est - kappa) / kappa
        worst_rel, worst_lmin = max(worst_rel, rel), min(worst_lmin, ev[0])
        ok &= rel <= 0.05 and ev[0] >= 1 - 1e-8
    return ok, f"{len(ORACLE_CASES)} instances, max |est-exact|/exact {worst_rel:.2e}, min lambda_min {worst_lmin:.12f}"


def criterion_5():
    ok, devs = True, []
    for cs in ("C", "CE"):
        sub = dense_level_one(2, 12, 3, cs)
        ev_full = spectrum(sub.A, DenseBddc(sub).matrix())
        ev_red = ReducedBddc(sub).spectrum()
        good, dev = compare_multisets(ev_full, ev_red, 1e-7)
        ok &= good
        devs.append(f"{cs}: max deviation {dev:.2e}")
    return ok, "; ".join(devs)


@lru_cache(maxsize=None)
def audit(dim, cells, ratio, cs):
    return audit_multispace_assumptions(dense_level_one(dim, cells, ratio, cs)).entries


AUDIT_CASES = [(2, 12, 3, "C"), (2, 12, 3, "CE"), (2, 16, 4, "C"), (3, 12, 3, "CEF")]


def criterion_6():
    ok, parts = True, []
    for case in AUDIT_CASES:
        e = audit(*case)
        defect = max(e["orthogonality_defect"], e["projection_defect"], e["unity_defect"])
        good = defect <= 1e-9 and e["kappa"] <= e["omega"] + 1e-6
        ok &= good
        parts.append(f"{case[0]}D r={case[2]} {case[3]}: defect {defect:.1e}, "
                     f"kappa {e['kappa']:.6f} <= omega {e['omega']:.6f} "
                     f"(three-space split max {e['omega_split']:.4f})")
    return ok, "; ".join(parts)


def criterion_7():
    ok, parts = True, []
    for cs in ("C", "CE"):
        prec = cached_setup(2, 3, 3, cs)[1]
        exact = prec.exact_level2_solver()
        B = materialize(lambda X: prec.apply_two_level(X, exact), prec.n)
        ev = spectrum(prec.A.toarray(), B)
        sub = dense_level_one(2, 36, 3, cs)
        ev_ref = spectrum(sub.A, DenseBddc(sub).matrix())
        k, k_ref = ev[-1] / ev[0], ev_ref[-1] / ev_ref[0]
        ok &= abs(k - k_ref) <= 1e-7
        parts.append(f"{cs}: exact level 2 {k:.10f} vs two-level {k_ref:.10f}")
    return ok, "; ".join(parts)


def criterion_8():
    checks = {}
    for dim in (2, 3):
        checks[f"element rows {dim}D"] = np.abs(element_stiffness(dim, 0.1).sum(axis=1)).max() <= 1e-14
    rng = np.random.default_rng(8)
    prec = cached_setup(2, 3, 3, "C")[1]
    for i, lvl in enumerate(prec.levels, start=1):
        S, m = lvl.geometry.gather.shape
        u = rng.standard_normal((lvl.n, 1))
        w = rng.standard_normal((S, m, 1))
        Ew = lvl.average(w)
        checks[f"E unity L{i}"] = np.abs(lvl.average(lvl.to_broken(u)) - u).max() <= 1e-13
        checks[f"E idempotent L{i}"] = np.abs(lvl.average(lvl.to_broken(Ew)) - Ew).max() <= 1e-13
    X = rng.standard_normal((prec.n, 6))
    X -= X.mean(axis=0)
    G = X.T @ prec.apply(X)
    checks["B symmetric"] = np.abs(G - G.T).max() <= 1e-9 * np.abs(G).max()
    checks["B positive"] = np.linalg.eigvalsh(0.5 * (G + G.T))[0] > 0

    small = cached_setup(2, 2, 3, "C")[1]
    A = small.A.toarray()
    b = random_zero_mean_rhs(small.n, 5)
    xs = np.linalg.pinv(A) @ b
    errs = []
    pcg(small.A.dot, small.apply, b, callback=lambda k, x: errs.append((x - xs) @ A @ (x - xs)))
    checks["A-norm monotone"] = bool(np.all(np.diff(errs) <= 1e-14 * errs[0]))
    r1 = pcg(prec.A.dot, prec.apply, random_zero_mean_rhs(prec.n, 9), seed=9)[1]
    r2 = pcg(prec.A.dot, prec.apply, random_zero_mean_rhs(prec.n, 9), seed=9)[1]
    checks["SolveReport deterministic"] = r1 == r2
    failed = [k for k, v in checks.items() if not v]
    return not failed, f"{len(checks)} checks" + (f", failed: {failed}" if failed else "")


CRITERIA = {
    1: ("2D runs, ratio 3", criterion_1),
    2: ("2D runs, ratio 4", criterion_2),
    3: ("3D runs, ratio 3", criterion_3),
    4: ("Oracle exactness", criterion_4),
    5: ("Reduced-problem spectral equivalence", criterion_5),
    6: ("Multispace audit", criterion_6),
    7: ("Recursion limit", criterion_7),
    8: ("Property suite", criterion_8),
}


def report(num):
    title, fn = CRITERIA[num]
    ok, detail = fn()
    line = f"criterion {num} [{title}]: {'PASS' if ok else 'FAIL'} -- {detail}"
    return ok, line


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num, capsys):
    ok, line = report(num)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [report(k) for k in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
