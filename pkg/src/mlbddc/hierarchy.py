"""Multilevel substructure decomposition of a periodic structured grid.

Every degree of freedom carries a geometric position stored in *doubled*
fine-cell units, so that fine nodes, edge midpoints and face centers of
substructures at any level have integer coordinates.  Positions wrap modulo
``2 * cells_per_axis``.

Level ``i`` substructures are aligned cubes of ``ratios[i-1] ** dim`` level-i
elements; level-1 elements are the fine cells and level-(i+1) elements are
the level-i substructures, whose coarse degrees of freedom (corner values,
edge and face averages) become the level-(i+1) degrees of freedom.  All
substructures at one level are congruent, so the local topology is stored
once per level in a reference substructure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .mesh_fe import GridSpec, cell_offsets

COARSE_SPACES = ("C", "E", "CE", "CEF")

INTERIOR, FACE, EDGE, CORNER = "interior", "face", "edge", "corner"


class DegenerateConstraintError(ValueError):
    """A requested coarse degree of freedom has an empty support."""


@dataclass(frozen=True)
class HierarchySpec:
    dim: int
    levels: int
    ratios: tuple[int, ...]
    coarse_space: str = "C"

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(int(r) for r in self.ratios))
        if self.dim not in (2, 3):
            raise ValueError(f"unsupported dimension {self.dim}")
        if self.levels < 2:
            raise ValueError("need at least two levels")
        if len(self.ratios) != self.levels - 1:
            raise ValueError(f"expected {self.levels - 1} ratios, got {len(self.ratios)}")
        if any(r < 2 for r in self.ratios):
            raise ValueError("coarsening ratios must be >= 2")
        check_coarse_space(self.coarse_space, self.dim)

    @classmethod
    def uniform(cls, dim, levels, ratio, coarse_space="C"):
        return cls(dim, levels, (ratio,) * (levels - 1), coarse_space)

    @property
    def cells_per_axis(self) -> int:
        # the coarsest decomposition always has 4 substructures per axis
        return 4 * math.prod(self.ratios)

    def grid(self) -> GridSpec:
        return GridSpec(self.dim, self.cells_per_axis)


def check_coarse_space(coarse_space: str, dim: int):
    if coarse_space not in COARSE_SPACES:
        raise ValueError(f"unknown coarse space {coarse_space!r}; choose from {COARSE_SPACES}")
    if dim == 2 and coarse_space in ("E", "CEF"):
        raise ValueError(f"coarse space {coarse_space} is only supported in 3D")


def position_keys(pos: np.ndarray, period: int) -> np.ndarray:
    """Scalar key of wrapped positions, lexicographic with x fastest."""
    pos = np.mod(pos, period)
    return pos @ (period ** np.arange(pos.shape[-1], dtype=np.int64))


def lookup(keys: np.ndarray, sorted_keys: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(sorted_keys, keys)
    idx = np.minimum(idx, len(sorted_keys) - 1)
    if not np.array_equal(sorted_keys[idx], keys):
        raise KeyError("position not present in the degree-of-freedom set")
    return idx


def lattice(count: int, dim: int) -> np.ndarray:
    """Integer points of [0, count)^dim, x fastest."""
    return np.array(list(itertools.product(range(count), repeat=dim)))[:, ::-1]


@dataclass
class CoarseConstraints:
    """Coarse degrees of freedom of the reference substructure at one level.

    ``matrix`` maps local dof values to coarse dof values; ``gather[s]``
    numbers the coarse dofs of substructure ``s`` globally.
    """

    coarse_space: str
    matrix: np.ndarray
    kinds: list[str]
    centers: np.ndarray
    supports: list[np.ndarray]
    gather: np.ndarray
    positions: np.ndarray

    @property
    def n_local(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_global(self) -> int:
        return len(self.positions)


@dataclass
class DofClassification:
    level: int
    category: np.ndarray
    multiplicity: np.ndarray

    @property
    def interface(self) -> np.ndarray:
        return np.flatnonzero(self.multiplicity > 1)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.multiplicity == 1)

    def count(self, category: str) -> int:
        return int(np.count_nonzero(self.category == category))


@dataclass
class Level:
    """Geometry of one substructuring level (1-based ``index``)."""

    index: int
    dim: int
    period: int
    ratio: int
    elem_size: int
    elem_relpos: np.ndarray
    positions: np.ndarray
    origins: np.ndarray
    local_relpos: np.ndarray
    elem_local: np.ndarray
    gather: np.ndarray
    constraints: CoarseConstraints | None = None
    _keys: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        """Substructure side in doubled fine-cell units."""
        return self.ratio * self.elem_size

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def n_substructures(self) -> int:
        return len(self.origins)

    @property
    def n_local(self) -> int:
        return len(self.local_relpos)

    @property
    def local_interior(self) -> np.ndarray:
        q = self.local_relpos
        return np.flatnonzero(np.all((q > 0) & (q < self.size), axis=1))

    @property
    def local_interface(self) -> np.ndarray:
        q = self.local_relpos
        return np.flatnonzero(np.any((q == 0) | (q == self.size), axis=1))

    def local_category(self) -> np.ndarray:
        """Geometric category of each reference-substructure dof."""
        n_free = np.sum((self.local_relpos > 0) & (self.local_relpos < self.size), axis=1)
        names = _category_names(self.dim)
        return np.array([names[self.dim - f] for f in n_free], dtype=object)

    def multiplicity(self) -> np.ndarray:
        return np.bincount(self.gather.ravel(), minlength=self.n)


def _category_names(dim):
    """Category indexed by the number of axes on which a dof sits on the boundary."""
    return [INTERIOR, EDGE, CORNER] if dim == 2 else [INTERIOR, FACE, EDGE, CORNER]


def _multiplicity_names(dim):
    return {1: INTERIOR, 2: EDGE, 4: CORNER} if dim == 2 else {1: INTERIOR, 2: FACE, 4: EDGE, 8: CORNER}


def _make_level(index, dim, period, ratio, elem_size, elem_relpos, n_elem_axis):
    size = ratio * elem_size
    offsets = lattice(ratio, dim) * elem_size
    pts = (offsets[:, None, :] + elem_relpos[None, :, :]).reshape(-1, dim)
    local_keys, inverse = np.unique(position_keys(pts, 2 * size + 1), return_inverse=True)
    local_relpos = np.zeros((len(local_keys), dim), dtype=np.int64)
    local_relpos[inverse] = pts
    elem_local = inverse.reshape(len(offsets), len(elem_relpos))

    n_sub_axis = n_elem_axis // ratio
    origins = lattice(n_sub_axis, dim) * size
    glob = origins[:, None, :] + local_relpos[None, :, :]
    keys = position_keys(glob.reshape(-1, dim), period)
    ukeys, first = np.unique(keys, return_index=True)
    positions = np.mod(glob.reshape(-1, dim)[first], period)
    gather = lookup(keys, ukeys).reshape(len(origins), len(local_relpos))
    lvl = Level(index, dim, period, ratio, elem_size, np.asarray(elem_relpos), positions,
                origins, local_relpos, elem_local, gather)
    lvl._keys = ukeys
    return lvl


def reference_constraints(level: Level, coarse_space: str) -> CoarseConstraints:
    """Coarse dof rows of the reference substructure plus global numbering.

    Corners are point values; edge (face) rows are arithmetic means over the
    dofs strictly inside the edge (face), so corners are never part of an
    average and face averages exclude edge dofs.
    """
    check_coarse_space(coarse_space, level.dim)
    dim, size = level.dim, level.size
    q = level.local_relpos
    # per axis: 0 at the low side, 2 at the high side, 1 strictly inside
    tag = np.where(q == 0, 0, np.where(q == size, 2, 1))
    n_free = np.sum(tag == 1, axis=1)
    wanted = {"C": 0, "E": 1, "F": 2}
    kinds_order = [k for k in "CEF" if k in coarse_space]

    rows, kinds, centers, supports = [], [], [], []
    for kind in kinds_order:
        nf = wanted[kind]
        for ent in itertools.product((0, 1, 2), repeat=dim):
            ent = np.array(ent[::-1])
            if np.sum(ent == 1) != nf:
                continue
            members = np.flatnonzero(np.all(tag == ent, axis=1) & (n_free == nf))
            if len(members) == 0:
                raise DegenerateConstraintError(
                    f"level {level.index}: {kind} coarse dof at {tuple(ent)} has no supporting dofs")
            row = np.zeros(level.n_local)
            row[members] = 1.0 / len(members)
            rows.append(row)
            kinds.append({"C": CORNER, "E": EDGE, "F": FACE}[kind])
            centers.append(ent * size // 2)
            supports.append(members)
    C = np.array(rows)
    centers = np.array(centers, dtype=np.int64)

    glob = level.origins[:, None, :] + centers[None, :, :]
    keys = position_keys(glob.reshape(-1, dim), level.period)
    ukeys, first = np.unique(keys, return_index=True)
    positions = np.mod(glob.reshape(-1, dim)[first], level.period)
    gather = lookup(keys, ukeys).reshape(len(level.origins), len(centers))
    return CoarseConstraints(coarse_space, C, kinds, centers, supports, gather, positions)


@dataclass
class Hierarchy:
    spec: HierarchySpec
    grid: GridSpec
    levels: list[Level]

    @property
    def n(self) -> int:
        return self.levels[0].n

    @property
    def n_gamma(self) -> int:
        return int(np.count_nonzero(self.levels[0].multiplicity() > 1))

    @property
    def n_coarsest(self) -> int:
        return self.levels[-1].constraints.n_global

    def level(self, i: int) -> Level:
        if not 1 <= i <= len(self.levels):
            raise IndexError(f"level {i} out of range 1..{len(self.levels)}")
        return self.levels[i - 1]


def build_hierarchy(spec: HierarchySpec, grid: GridSpec | None = None) -> Hierarchy:
    grid = spec.grid() if grid is None else grid
    if grid.dim != spec.dim or grid.cells_per_axis != spec.cells_per_axis:
        raise ValueError(
            f"grid with {grid.cells_per_axis} cells per axis in {grid.dim}D is inconsistent "
            f"with {spec.dim}D hierarchy needing {spec.cells_per_axis}")
    period = 2 * grid.cells_per_axis
    elem_size = 2
    elem_relpos = cell_offsets(spec.dim) * 2
    n_elem_axis = grid.cells_per_axis
    levels = []
    for i, ratio in enumerate(spec.ratios, start=1):
        lvl = _make_level(i, spec.dim, period, ratio, elem_size, elem_relpos, n_elem_axis)
        lvl.constraints = reference_constraints(lvl, spec.coarse_space)
        levels.append(lvl)
        elem_size = lvl.size
        elem_relpos = lvl.constraints.centers
        n_elem_axis //= ratio
    return Hierarchy(spec, grid, levels)


def classify_dofs(hierarchy: Hierarchy, level: int) -> DofClassification:
    lvl = hierarchy.level(level)
    mult = lvl.multiplicity()
    names = _multiplicity_names(lvl.dim)
    try:
        category = np.array([names[m] for m in mult], dtype=object)
    except KeyError as exc:
        raise ValueError(f"unexpected dof multiplicity {exc.args[0]} at level {level}") from None
    return DofClassification(level, category, mult)


def coarse_dof_constraints(hierarchy: Hierarchy, level: int, coarse_space: str | None = None):
    lvl = hierarchy.level(level)
    if coarse_space is None or coarse_space == hierarchy.spec.coarse_space:
        return lvl.constraints
    return reference_constraints(lvl, coarse_space)
