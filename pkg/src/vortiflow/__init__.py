"""High-order finite-volume streamfunction-vorticity solver on polygonal meshes."""

from .mesh import Mesh, MeshError, load_mesh, save_mesh
from .quadrature import QuadratureRule, edge_quadrature, polygon_quadrature
from .reconstruction import (ConstraintSpec, PolyBasis, ReconstructionError,
                             ReconstructionOperator, build_constrained,
                             build_unconstrained, make_cauchy_constraint, weight)
from .segments import BoundarySegment, CollocationPoint, ProjectionError, curvature_polar
from .stencils import Stencil, StencilError, basis_size, build_stencil

__all__ = [
    "Mesh", "MeshError", "load_mesh", "save_mesh",
    "QuadratureRule", "edge_quadrature", "polygon_quadrature",
    "ConstraintSpec", "PolyBasis", "ReconstructionError", "ReconstructionOperator",
    "build_constrained", "build_unconstrained", "make_cauchy_constraint", "weight",
    "BoundarySegment", "CollocationPoint", "ProjectionError", "curvature_polar",
    "Stencil", "StencilError", "basis_size", "build_stencil",
]
