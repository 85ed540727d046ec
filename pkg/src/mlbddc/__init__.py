"""Two-level and multilevel BDDC for periodic Q1 Poisson problems."""
from .bddc import BddcPreconditioner, apply_multilevel, apply_two_level, setup
from .bench import ResultRow, RunConfig, run, sweep
from .hierarchy import (
    COARSE_SPACES,
    DegenerateConstraintError,
    HierarchySpec,
    build_hierarchy,
    classify_dofs,
    coarse_dof_constraints,
)
from .krylov import DefinitenessError, SolveReport, pcg
from .localsolvers import FactorizationError
from .mesh_fe import GridSpec, assemble_global, element_stiffness, random_zero_mean_rhs

__all__ = [
    "BddcPreconditioner", "COARSE_SPACES", "DefinitenessError", "DegenerateConstraintError",
    "FactorizationError", "GridSpec", "HierarchySpec", "ResultRow", "RunConfig", "SolveReport",
    "apply_multilevel", "apply_two_level", "assemble_global", "build_hierarchy", "classify_dofs",
    "coarse_dof_constraints", "element_stiffness", "pcg", "random_zero_mean_rhs", "run", "setup", "sweep",
]
