import itertools

import numpy as np
import pytest

from mlbddc.hierarchy import (
    DegenerateConstraintError,
    HierarchySpec,
    build_hierarchy,
    classify_dofs,
    coarse_dof_constraints,
    reference_constraints,
)
from mlbddc.mesh_fe import GridSpec, node_index


def hier(dim, levels, ratio, cs="C"):
    return build_hierarchy(HierarchySpec.uniform(dim, levels, ratio, cs))


@pytest.mark.parametrize("dim,levels,ratio,n,n_gamma,subs", [
    (2, 2, 3, 144, 80, 16),
    (2, 3, 3, 1296, 720, 144),
    (2, 3, 4, 4096, 1792, 256),
    (3, 2, 3, 1728, 1216, 64),
])
def test_counts(dim, levels, ratio, n, n_gamma, subs):
    h = hier(dim, levels, ratio)
    assert (h.n, h.n_gamma, h.level(1).n_substructures) == (n, n_gamma, subs)
    assert h.level(levels - 1).n_substructures == 4 ** dim


def test_coarse_counts_2d():
    assert hier(2, 2, 3, "C").n_coarsest == 16
    assert hier(2, 2, 3, "CE").n_coarsest == 48


@pytest.mark.parametrize("dim,ratio", [(2, 3), (2, 4), (3, 3)])
def test_classification_brute_force(dim, ratio):
    h = hier(dim, 2, ratio)
    N = h.grid.cells_per_axis
    coords = np.array(list(itertools.product(range(N), repeat=dim)))[:, ::-1]
    expected = np.zeros(N ** dim, dtype=int)
    expected[node_index(coords, N)] = 2 ** np.sum(coords % ratio == 0, axis=1)
    cls = classify_dofs(h, 1)
    np.testing.assert_array_equal(cls.multiplicity, expected)
    names = {1: "interior", 2: "edge" if dim == 2 else "face", 4: "corner" if dim == 2 else "edge", 8: "corner"}
    assert all(cls.category[i] == names[m] for i, m in enumerate(expected))


def test_level1_ordering_is_lexicographic():
    h = hier(2, 2, 3)
    N = h.grid.cells_per_axis
    pos = h.level(1).positions // 2
    np.testing.assert_array_equal(node_index(pos, N), np.arange(h.n))


def test_reference_categories_3d():
    lvl = hier(3, 2, 3).level(1)
    cat = lvl.local_category()
    assert np.sum(cat == "corner") == 8
    assert np.sum(cat == "edge") == 12 * 2
    assert np.sum(cat == "face") == 6 * 4
    assert np.sum(cat == "interior") == 8


@pytest.mark.parametrize("dim,cs", [(2, "C"), (2, "CE"), (3, "E"), (3, "CE"), (3, "CEF")])
def test_constraint_rows(dim, cs):
    h = hier(dim, 3, 2, cs) if dim == 3 else hier(dim, 3, 3, cs)
    for i in (1, 2):
        lvl = h.level(i)
        C = lvl.constraints.matrix
        assert np.abs(C[:, lvl.local_interior]).max(initial=0) == 0
        np.testing.assert_allclose(C.sum(axis=1), 1.0)
        assert np.linalg.matrix_rank(C) == C.shape[0]


def test_interfaces_nest():
    h = hier(2, 3, 3)
    l1, l2 = h.level(1), h.level(2)
    gamma1 = {tuple(p) for p in l1.positions[classify_dofs(h, 1).interface]}
    gamma2 = {tuple(p) for p in l2.positions[classify_dofs(h, 2).interface]}
    assert gamma2 <= gamma1
    # level-2 dofs are the level-1 coarse dofs
    assert l2.n == l1.constraints.n_global


def test_coarse_dof_constraints_override():
    h = hier(2, 2, 3, "C")
    assert coarse_dof_constraints(h, 1).n_local == 4
    assert coarse_dof_constraints(h, 1, "CE").n_local == 8


def test_degenerate_edges():
    # ratio 2 at level 2 of CE in 2D: edges of level-2 substructures carry one level-2 dof each
    h = hier(2, 3, 2, "CE")
    assert h.level(2).constraints.n_local == 8
    # with edge-only coarse dofs, level-2 dofs sit at edge midpoints, never at corners
    lvl = hier(3, 3, 2, "E").level(2)
    with pytest.raises(DegenerateConstraintError):
        reference_constraints(lvl, "CE")


@pytest.mark.parametrize("args", [
    (2, 1, (), "C"),
    (2, 3, (3,), "C"),
    (2, 2, (1,), "C"),
    (2, 2, (3,), "CEF"),
    (2, 2, (3,), "E"),
    (3, 2, (3,), "F"),
    (5, 2, (3,), "C"),
])
def test_spec_rejects(args):
    with pytest.raises(ValueError):
        HierarchySpec(*args)


def test_grid_mismatch_and_level_range():
    spec = HierarchySpec.uniform(2, 2, 3)
    with pytest.raises(ValueError):
        build_hierarchy(spec, GridSpec(2, 16))
    with pytest.raises(IndexError):
        build_hierarchy(spec).level(2)
