"""Finite-element bulk-surface splitting schemes for parabolic problems with
dynamic boundary conditions on the unit disk."""
from .assembly import BlockOperators, assemble_operators, interpolate_exact, load_vectors
from .mesh import Mesh, generate_disk_mesh, mesh_stats, read_mesh, serialize_mesh
from .problems import Problem, get_problem, linear_problem, semilinear_problem
from .schemes import SchemeConfig, Trajectory, Variant, integrate

__version__ = "0.1.0"

__all__ = [
    "BlockOperators", "Mesh", "Problem", "SchemeConfig", "Trajectory", "Variant",
    "assemble_operators", "generate_disk_mesh", "get_problem", "integrate",
    "interpolate_exact", "linear_problem", "load_vectors", "mesh_stats", "read_mesh",
    "semilinear_problem", "serialize_mesh",
]
