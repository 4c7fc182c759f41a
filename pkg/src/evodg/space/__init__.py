"""Spatial meshes, finite element spaces and operator assembly."""

from .assembly import (
    BlockOperator,
    CellQuadrature,
    ConfigurationError,
    assemble_coupling,
    assemble_weighted_mass,
    default_quadrature,
    evaluation_operator,
    load_operator,
    skew_block,
    write_triplets,
)
from .mesh import (
    IntervalMesh,
    MeshError,
    PointLocationError,
    TriMesh,
    build_interval_mesh,
    build_rect_trimesh,
    example1_interval_mesh,
)
from .spaces import FeSpace, LagrangeSpace, NedelecSpace, RaviartThomasSpace
