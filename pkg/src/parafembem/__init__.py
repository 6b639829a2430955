"""Parabolic-elliptic interface problems by non-symmetric FEM-BEM coupling in 2D."""

from .mesh import (COUPLING, BoundaryMesh, TimeGrid, TriMesh, build_capacitor_mesh,
                   build_lshape_mesh, build_time_grid, extract_boundary, uniform_refine)
from .timestep import (CoupledOperators, CoupledTrajectory, ProblemData, QuadConfig,
                       WeightScheme, solve_evolution)

__all__ = [
    "COUPLING", "BoundaryMesh", "TimeGrid", "TriMesh", "build_capacitor_mesh",
    "build_lshape_mesh", "build_time_grid", "extract_boundary", "uniform_refine",
    "CoupledOperators", "CoupledTrajectory", "ProblemData", "QuadConfig",
    "WeightScheme", "solve_evolution",
]
