"""Conforming finite element spaces: Lagrange P_k and Raviart-Thomas RT_r."""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg

from .mesh import IntervalMesh, SimplexMesh, TriMesh
from .reference import eval_monomials, gauss_interval, grad_monomials, lattice, monomial_exponents, reference_rule


class FeSpace:
    """Common interface.

    ``cell_dofs[c, i]`` is the global dof of local basis function ``i`` on cell ``c``,
    or ``-1`` if that function was eliminated by an essential boundary condition.
    """

    kind: str
    mesh: SimplexMesh
    degree: int
    ncomp: int
    ndofs: int
    cell_dofs: np.ndarray

    def tabulate(self, ref_points: np.ndarray) -> np.ndarray:
        """Basis values at mapped reference points, shape (nc, np, nloc, ncomp)."""
        raise NotImplementedError

    def tabulate_derivative(self, ref_points: np.ndarray) -> np.ndarray:
        """The derivative ``A`` acts with: d/dx (1D), gradient (2D Lagrange) or divergence (RT)."""
        raise NotImplementedError

    def interpolate(self, func) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, coeffs: np.ndarray, point) -> np.ndarray:
        """Value of the expansion at a single physical point."""
        c, ref = self.mesh.locate(point)
        vals = self._tabulate_cells(np.array([c]), ref[None, :])[0, 0]  # (nloc, ncomp)
        dofs = self.cell_dofs[c]
        local = np.where(dofs >= 0, np.asarray(coeffs)[np.maximum(dofs, 0)], 0.0)
        out = local @ vals
        return out[0] if self.ncomp == 1 else out

    def _tabulate_cells(self, cells: np.ndarray, ref_points: np.ndarray) -> np.ndarray:
        return self.tabulate(ref_points)[cells]


class LagrangeSpace(FeSpace):
    """Continuous piecewise P_k on a simplex mesh (1D or 2D), optionally with u = 0 on the boundary."""

    kind = "lagrange"

    def __init__(self, mesh: SimplexMesh, k: int, dirichlet: bool = False):
        if k < 1:
            raise ValueError("Lagrange degree must be >= 1")
        self.mesh = mesh
        self.degree = k
        self.dirichlet = dirichlet
        self.ncomp = 1
        d = mesh.dim
        self._exps = monomial_exponents(d, k)
        self.ref_nodes = lattice(d, k)
        self._coef = np.linalg.inv(eval_monomials(self._exps, self.ref_nodes))  # columns = basis
        phys = mesh.map_points(self.ref_nodes)  # (nc, nloc, d)
        flat = phys.reshape(-1, d)
        _, first, inv = np.unique(np.round(flat, 9), axis=0, return_index=True, return_inverse=True)
        uniq = flat[first]  # exact coordinates; rounding only identifies shared nodes
        inv = inv.reshape(mesh.n_cells, -1)
        if dirichlet:
            bnd = mesh.on_boundary(uniq)
            new = -np.ones(len(uniq), dtype=np.int64)
            new[~bnd] = np.arange((~bnd).sum())
            self.node_coords = uniq[~bnd]
            self.cell_dofs = new[inv]
        else:
            self.node_coords = uniq
            self.cell_dofs = inv.astype(np.int64)
        self.ndofs = len(self.node_coords)

    def tabulate(self, ref_points):
        ref = eval_monomials(self._exps, ref_points) @ self._coef  # (np, nloc)
        return np.broadcast_to(ref[None, :, :, None], (self.mesh.n_cells,) + ref.shape + (1,))

    def tabulate_derivative(self, ref_points):
        g = np.einsum("pmd,mi->pid", grad_monomials(self._exps, ref_points), self._coef)
        phys = np.einsum("cde,pie->cpid", np.transpose(self.mesh.jinv, (0, 2, 1)), g)
        return phys

    def interpolate(self, func) -> np.ndarray:
        return np.asarray(func(self.node_coords), dtype=float).reshape(self.ndofs)

    def _tabulate_cells(self, cells, ref_points):
        ref = eval_monomials(self._exps, ref_points) @ self._coef
        return np.broadcast_to(ref[None, :, :, None], (len(cells),) + ref.shape + (1,))


class RaviartThomasSpace(FeSpace):
    """H(div)-conforming RT_r = P_r^2 + x P_r on triangles (normal traces of degree r).

    Degrees of freedom: for every edge with endpoints ``a < b`` (global vertex numbers),
    ``int_e v.n L_j ds`` with ``n`` the clockwise rotation of ``b - a`` and ``L_j`` Legendre
    polynomials in the arc parameter from ``a`` to ``b``; plus interior moments against
    P_{r-1}^2. The local basis on each cell is the dual basis of these functionals within the
    Piola image of the reference space, so shared edge dofs coincide exactly between neighbours.
    """

    kind = "raviart_thomas"

    def __init__(self, mesh: TriMesh, r: int):
        if not isinstance(mesh, TriMesh):
            raise TypeError("Raviart-Thomas elements need a triangle mesh")
        if r < 0:
            raise ValueError("RT order must be >= 0")
        self.mesh = mesh
        self.degree = r
        self.ncomp = 2
        self._pexps = monomial_exponents(2, r)
        self._hexps = [e for e in self._pexps if sum(e) == r]
        self.nloc = (r + 1) * (r + 3)
        self.n_edge_dofs = r + 1
        self.n_int = r * (r + 1)
        nc = mesh.n_cells
        self.ndofs = mesh.n_edges * (r + 1) + nc * self.n_int
        cd = np.empty((nc, self.nloc), dtype=np.int64)
        for i in range(3):
            for j in range(r + 1):
                cd[:, i * (r + 1) + j] = mesh.cell_edges[:, i] * (r + 1) + j
        off = mesh.n_edges * (r + 1)
        for j in range(self.n_int):
            cd[:, 3 * (r + 1) + j] = off + np.arange(nc) * self.n_int + j
        self.cell_dofs = cd
        self._build_dual()

    # reference spanning set -------------------------------------------------
    def _span_ref(self, pts):
        """Spanning functions of RT_r on the reference triangle: values (np, n, 2), div (np, n)."""
        pts = np.atleast_2d(pts)
        m = eval_monomials(self._pexps, pts)
        gm = grad_monomials(self._pexps, pts)
        npts, nm = m.shape
        vals = np.zeros((npts, 2 * nm + len(self._hexps), 2))
        div = np.zeros((npts, 2 * nm + len(self._hexps)))
        vals[:, :nm, 0] = m
        div[:, :nm] = gm[:, :, 0]
        vals[:, nm : 2 * nm, 1] = m
        div[:, nm : 2 * nm] = gm[:, :, 1]
        hidx = [self._pexps.index(e) for e in self._hexps]
        for j, mi in enumerate(hidx):
            vals[:, 2 * nm + j, 0] = pts[:, 0] * m[:, mi]
            vals[:, 2 * nm + j, 1] = pts[:, 1] * m[:, mi]
            div[:, 2 * nm + j] = (self.degree + 2) * m[:, mi]
        return vals, div

    def _span_phys(self, ref_pts_per_cell):
        """Piola images of the spanning set at per-cell reference points (nc, np, 2)."""
        nc, npts, _ = ref_pts_per_cell.shape
        vals, _ = self._span_ref(ref_pts_per_cell.reshape(-1, 2))
        vals = vals.reshape(nc, npts, self.nloc, 2)
        return np.einsum("cij,cpnj->cpni", self.mesh.jac, vals) / self.mesh.detj[:, None, None, None]

    def _edge_geometry(self, npts):
        s, w = gauss_interval(npts)
        m = self.mesh
        a = m.coords[m.edges[:, 0]]
        b = m.coords[m.edges[:, 1]]
        d = b - a
        length = np.linalg.norm(d, axis=1)
        normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
        pts = a[:, None, :] + s[None, :, None] * d[:, None, :]  # (ne, np, 2)
        leg = npleg.legvander(2.0 * s - 1.0, self.degree)  # (np, r+1)
        return pts, w, normal, length, leg

    def _int_rule(self):
        return reference_rule(2, 2 * self.degree + 2)

    def _build_dual(self):
        m = self.mesh
        r = self.degree
        epts, ew, normal, length, leg = self._edge_geometry(r + 2)
        nc = m.n_cells
        D = np.zeros((nc, self.nloc, self.nloc))
        for i in range(3):
            e = m.cell_edges[:, i]
            p = epts[e]  # (nc, np, 2)
            ref = np.einsum("cij,cpj->cpi", m.jinv, p - m.origins[:, None, :])
            phi = self._span_phys(ref)  # (nc, np, n, 2)
            vn = np.einsum("cpni,ci->cpn", phi, normal[e])
            rows = np.einsum("p,pj,cpn->cjn", ew, leg, vn) * length[e][:, None, None]
            D[:, i * (r + 1) : (i + 1) * (r + 1), :] = rows
        if self.n_int:
            qp, qw = self._int_rule()
            phi = self._span_phys(np.broadcast_to(qp, (nc,) + qp.shape))
            mono = eval_monomials(monomial_exponents(2, r - 1), qp)  # (np, nm)
            base = 3 * (r + 1)
            nm = mono.shape[1]
            for comp in range(2):
                D[:, base + comp * nm : base + (comp + 1) * nm, :] = np.einsum(
                    "p,pj,cpn->cjn", qw, mono, phi[..., comp]
                )
        self._coef = np.linalg.inv(D)  # (nc, n_span, n_basis)

    # FeSpace interface --------------------------------------------------------
    def tabulate(self, ref_points):
        return self._tabulate_cells(np.arange(self.mesh.n_cells), ref_points)

    def _tabulate_cells(self, cells, ref_points):
        vals, _ = self._span_ref(ref_points)
        m = self.mesh
        phys = np.einsum("cij,pnj->cpni", m.jac[cells], vals) / m.detj[cells][:, None, None, None]
        return np.einsum("cpni,cnk->cpki", phys, self._coef[cells])

    def tabulate_derivative(self, ref_points):
        _, div = self._span_ref(ref_points)
        phys = div[None, :, :] / self.mesh.detj[:, None, None]
        return np.einsum("cpn,cnk->cpk", phys, self._coef)[..., None]

    def interpolate(self, func) -> np.ndarray:
        """Canonical interpolant: apply the edge and interior moment functionals to ``func``."""
        m = self.mesh
        r = self.degree
        epts, ew, normal, length, leg = self._edge_geometry(r + 4)
        ne, npts, _ = epts.shape
        fv = np.asarray(func(epts.reshape(-1, 2)), dtype=float).reshape(ne, npts, 2)
        fn = np.einsum("epi,ei->ep", fv, normal)
        out = np.zeros(self.ndofs)
        out[: ne * (r + 1)] = (np.einsum("p,pj,ep->ej", ew, leg, fn) * length[:, None]).ravel()
        if self.n_int:
            qp, qw = self._int_rule()
            phys = m.map_points(qp)
            fq = np.asarray(func(phys.reshape(-1, 2)), dtype=float).reshape(m.n_cells, len(qw), 2)
            mono = eval_monomials(monomial_exponents(2, r - 1), qp)
            target = np.concatenate(
                [np.einsum("p,pj,cp->cj", qw, mono, fq[..., c]) for c in range(2)], axis=1
            )
            out[ne * (r + 1) :] = target.ravel()
        return out


class NedelecSpace(FeSpace):
    """Placeholder for H(curl)-conforming elements; not provided by this package."""

    kind = "nedelec"

    def __init__(self, *args, **kwargs):
        raise NotImplementedError("curl-conforming (Nedelec) elements are not implemented")
