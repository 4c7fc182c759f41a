"""Sparse assembly of mass, coupling and load operators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .reference import reference_rule
from .spaces import FeSpace, LagrangeSpace, RaviartThomasSpace


class ConfigurationError(ValueError):
    pass


@dataclass
class CellQuadrature:
    """Reference rule of a given polynomial order, mapped to every cell."""

    ref_points: np.ndarray
    ref_weights: np.ndarray
    points: np.ndarray  # (nc, np, d)
    jxw: np.ndarray  # (nc, np)

    @classmethod
    def build(cls, mesh, order: int) -> "CellQuadrature":
        qp, qw = reference_rule(mesh.dim, order)
        return cls(qp, qw, mesh.map_points(qp), mesh.detj[:, None] * qw[None, :])

    @property
    def n_points(self) -> int:
        return self.points.shape[0] * self.points.shape[1]


def default_quadrature(space: FeSpace) -> CellQuadrature:
    # order 2k+2 dominates every product of basis functions and smooth data
    k = space.degree + (1 if space.kind == "raviart_thomas" else 0)
    return CellQuadrature.build(space.mesh, 2 * k + 2)


def _scatter(space_a: FeSpace, space_b: FeSpace, local: np.ndarray) -> sp.csr_matrix:
    """Assemble element matrices local[c, i, j] into a global sparse matrix."""
    ra = space_a.cell_dofs[:, :, None]
    cb = space_b.cell_dofs[:, None, :]
    rows = np.broadcast_to(ra, local.shape).ravel()
    cols = np.broadcast_to(cb, local.shape).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0) & (vals != 0)
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(space_a.ndofs, space_b.ndofs))
    return mat.tocsr()


def assemble_weighted_mass(space: FeSpace, indicator=None, quad: CellQuadrature | None = None) -> sp.csr_matrix:
    """``int_Omega chi phi_i . phi_j`` with ``chi`` constant per cell.

    ``indicator`` is a subdomain tag, a per-cell coefficient array, or ``None`` for chi = 1.
    """
    quad = quad or default_quadrature(space)
    if indicator is None or isinstance(indicator, str):
        chi = space.mesh.indicator(indicator)
    else:
        chi = np.asarray(indicator, dtype=float)
    phi = space.tabulate(quad.ref_points)
    local = np.einsum("cp,cpix,cpjx->cij", quad.jxw * chi[:, None], phi, phi)
    mat = _scatter(space, space, local)
    return ((mat + mat.T) * 0.5).tocsr()


def assemble_coupling(u_space: FeSpace, v_space: FeSpace, quad: CellQuadrature | None = None) -> sp.csr_matrix:
    """``C_ij = int (D psi_j) phi_i`` with ``D`` = d/dx (1D) or div (RT) and ``phi`` scalar Lagrange."""
    if u_space.mesh is not v_space.mesh:
        raise ConfigurationError("coupled spaces must live on the same mesh")
    if not isinstance(u_space, LagrangeSpace):
        raise ConfigurationError("the scalar component must be a Lagrange space")
    if isinstance(v_space, LagrangeSpace) and v_space.mesh.dim == 1:
        pass
    elif isinstance(v_space, RaviartThomasSpace):
        pass
    else:
        raise ConfigurationError(f"cannot pair {u_space.kind} with {v_space.kind} on a {v_space.mesh.dim}D mesh")
    quad = quad or default_quadrature(v_space)
    phi = u_space.tabulate(quad.ref_points)[..., 0]
    dpsi = v_space.tabulate_derivative(quad.ref_points)[..., 0]
    local = np.einsum("cp,cpi,cpj->cij", quad.jxw, phi, dpsi)
    return _scatter(u_space, v_space, local)


def skew_block(c: sp.spmatrix) -> sp.csr_matrix:
    """``[[0, C], [-C^T, 0]]``."""
    return sp.bmat([[None, c], [-c.T, None]], format="csr")


def evaluation_operator(space: FeSpace, quad: CellQuadrature) -> list[sp.csr_matrix]:
    """Per component, a matrix mapping coefficients to values at all quadrature points."""
    phi = space.tabulate(quad.ref_points)  # (nc, np, nloc, ncomp)
    nc, npts, nloc, ncomp = phi.shape
    rows = np.broadcast_to(np.arange(nc * npts).reshape(nc, npts, 1), (nc, npts, nloc)).ravel()
    cols = np.broadcast_to(space.cell_dofs[:, None, :], (nc, npts, nloc)).ravel()
    keep = cols >= 0
    out = []
    for comp in range(ncomp):
        vals = phi[..., comp].ravel()
        out.append(sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(nc * npts, space.ndofs)))
    return out


def load_operator(space: FeSpace, quad: CellQuadrature) -> list[sp.csr_matrix]:
    """Per component, ``L`` with ``(L @ f_values.ravel())_i = int f phi_i`` (component-wise)."""
    ev = evaluation_operator(space, quad)
    w = sp.diags(quad.jxw.ravel())
    return [(e.T @ w).tocsr() for e in ev]


def write_triplets(mat: sp.spmatrix, path) -> None:
    """Dump a sparse matrix as ``row col value`` lines."""
    coo = mat.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {mat.shape[0]} {mat.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


@dataclass
class BlockOperator:
    """Composite operators over ``(u, v)`` with dof layout ``[u | v]``."""

    spaces: tuple
    M0: sp.csr_matrix
    M1: sp.csr_matrix
    A: sp.csr_matrix
    mass: sp.csr_matrix  # unweighted composite L2 mass
    offsets: tuple = field(default=())

    def __post_init__(self):
        if not self.offsets:
            sizes = [s.ndofs for s in self.spaces]
            self.offsets = tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())

    @property
    def ndofs(self) -> int:
        return self.offsets[-1]

    def component(self, vec: np.ndarray, i: int) -> np.ndarray:
        return vec[..., self.offsets[i] : self.offsets[i + 1]]

    def gamma(self, rho: float) -> float:
        """Lower bound of rho*M0 + M1 for indicator-type coefficients."""
        return min(rho, 1.0)
