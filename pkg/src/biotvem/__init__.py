"""Virtual element solver for coupled 3D Stokes flow and a 2D Biot-Kirchhoff plate."""

from .coupling import Discretization, LoadData, assemble, discretize, inf_sup_constant
from .exceptions import (
    AssemblyError,
    BiotVemError,
    ConfigurationError,
    ConvergenceError,
    ElementError,
    GeometryError,
    MeshParseError,
    SolverError,
    TopologyError,
)
from .harness import ErrorReport, ManufacturedCase, compute_errors, eoc, example1_case, run_study
from .mesh import PolyMesh3, example1_rule, extract_surface, generate_cube_mesh, import_mesh, export_mesh, tag_boundaries
from .params import ModelParams
from .solver import SolutionFields, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "BiotVemError", "ConfigurationError", "ConvergenceError", "Discretization", "ElementError",
    "ErrorReport", "GeometryError", "LoadData", "ManufacturedCase", "MeshParseError", "ModelParams", "PolyMesh3",
    "SolutionFields", "SolverConfig", "SolverError", "TopologyError", "assemble", "compute_errors", "discretize",
    "eoc", "example1_case", "example1_rule", "export_mesh", "extract_surface", "generate_cube_mesh", "import_mesh",
    "inf_sup_constant", "run_study", "solve", "tag_boundaries",
]
