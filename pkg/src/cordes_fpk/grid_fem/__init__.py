"""Structured meshes, multilinear vector spaces and Galerkin assembly on Y = (0,1)^n."""
from .assembly import (
    SparseSystem,
    assemble,
    cell_quadrature,
    check_alignment,
    divergence_at,
    gram_matrices,
    nearness_defect,
    rot_of_jacobian,
)
from .mesh import Mesh, build_mesh
from .quadrature import composite_points, gauss_rule, integrate
from .shape import shape_eval
from .space import PERIODIC, TANGENTIAL, FeSpace, build_space

__all__ = [
    "FeSpace",
    "Mesh",
    "PERIODIC",
    "SparseSystem",
    "TANGENTIAL",
    "assemble",
    "build_mesh",
    "build_space",
    "cell_quadrature",
    "check_alignment",
    "composite_points",
    "divergence_at",
    "gauss_rule",
    "gram_matrices",
    "integrate",
    "nearness_defect",
    "rot_of_jacobian",
    "shape_eval",
]
