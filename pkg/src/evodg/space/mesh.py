"""Simplicial meshes of intervals and rectangles."""

from __future__ import annotations

import math

import numpy as np


class MeshError(ValueError):
    pass


class PointLocationError(LookupError):
    pass


class SimplexMesh:
    """Affine simplices given by vertex coordinates and cell connectivity.

    ``tags`` maps a subdomain name to a boolean mask over cells.
    """

    def __init__(self, coords: np.ndarray, cells: np.ndarray, tags: dict[str, np.ndarray] | None = None):
        self.coords = np.asarray(coords, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        self.dim = self.coords.shape[1]
        self.tags = dict(tags or {})
        v = self.coords[self.cells]  # (nc, d+1, d)
        self.origins = v[:, 0, :]
        self.jac = np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))  # columns are edge vectors
        self.detj = np.linalg.det(self.jac)
        self.jinv = np.linalg.inv(self.jac)
        if np.any(self.detj <= 0):
            raise MeshError("cells must be positively oriented and non-degenerate")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def centroids(self) -> np.ndarray:
        return self.coords[self.cells].mean(axis=1)

    @property
    def h(self) -> float:
        v = self.coords[self.cells]
        d = v[:, :, None, :] - v[:, None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def indicator(self, tag: str | None) -> np.ndarray:
        """Per-cell 0/1 coefficient for a subdomain; ``None`` means the whole domain."""
        if tag is None:
            return np.ones(self.n_cells)
        return self.tags[tag].astype(float)

    def map_points(self, ref_points: np.ndarray) -> np.ndarray:
        """Physical images of reference points on every cell, shape (nc, np, d)."""
        return self.origins[:, None, :] + np.einsum("cij,pj->cpi", self.jac, ref_points)

    def locate(self, point, tol: float = 1e-12) -> tuple[int, np.ndarray]:
        """Cell index and reference coordinates of a physical point."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        ref = np.einsum("cij,cj->ci", self.jinv, p[None, :] - self.origins)
        bary = np.concatenate([1.0 - ref.sum(1, keepdims=True), ref], axis=1)
        inside = np.nonzero(bary.min(axis=1) >= -tol)[0]
        if len(inside) == 0:
            raise PointLocationError(f"point {p} lies outside the mesh")
        c = int(inside[0])
        return c, ref[c]

    def on_boundary(self, points: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        raise NotImplementedError


class IntervalMesh(SimplexMesh):
    """Equidistant partition of ``[a, b]`` into ``n`` cells."""

    def __init__(self, a: float, b: float, n: int, tags: dict[str, np.ndarray] | None = None):
        self.a, self.b, self.N = float(a), float(b), int(n)
        self.vertices = np.linspace(a, b, n + 1)
        cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        super().__init__(self.vertices[:, None], cells, tags)

    def on_boundary(self, points, tol=1e-10):
        x = np.asarray(points)[..., 0]
        scale = self.b - self.a
        return (np.abs(x - self.a) < tol * scale) | (np.abs(x - self.b) < tol * scale)

    def locate(self, point, tol=1e-12):
        x = float(np.atleast_1d(point)[0])
        scale = self.b - self.a
        if x < self.a - tol * scale or x > self.b + tol * scale:
            raise PointLocationError(f"point {x} outside [{self.a}, {self.b}]")
        c = int(np.clip(np.searchsorted(self.vertices, x, side="right") - 1, 0, self.N - 1))
        return c, np.array([(x - self.vertices[c]) / (self.vertices[c + 1] - self.vertices[c])])


class TriMesh(SimplexMesh):
    """Triangulation with a global edge list.

    Edges are stored with ascending vertex index; ``cell_edges[c, i]`` is the edge opposite
    local vertex ``i``.
    """

    def __init__(self, coords, cells, tags=None, box=None):
        super().__init__(coords, cells, tags)
        self.box = box
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = np.sort(self.cells[:, local], axis=2).reshape(-1, 2)
        self.edges, inv = np.unique(pairs, axis=0, return_inverse=True)
        self.cell_edges = inv.reshape(-1, 3)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def interior_edges(self) -> np.ndarray:
        counts = np.bincount(self.cell_edges.ravel(), minlength=self.n_edges)
        return np.nonzero(counts == 2)[0]

    def on_boundary(self, points, tol=1e-10):
        (x0, x1), (y0, y1) = self.box
        p = np.asarray(points)
        x, y = p[..., 0], p[..., 1]
        return (
            (np.abs(x - x0) < tol) | (np.abs(x - x1) < tol) | (np.abs(y - y0) < tol) | (np.abs(y - y1) < tol)
        )


def build_interval_mesh(a: float, b: float, n: int, tags=None) -> IntervalMesh:
    if not a < b:
        raise MeshError(f"need a < b, got a={a}, b={b}")
    if n < 1:
        raise MeshError(f"need at least one cell, got N={n}")
    return IntervalMesh(a, b, n, tags)


RECT_PATTERNS = ("up", "down", "alternating", "radial", "antiradial", "crisscross")


def build_rect_trimesh(n: int, lo: float = -1.0, hi: float = 1.0, diagonal: str = "up") -> TriMesh:
    """``n x n`` squares on ``(lo, hi)^2``, each cut into triangles.

    ``diagonal`` selects the cut per square: ``up`` (lower-left to upper-right), ``down``
    (upper-left to lower-right), ``alternating`` (checkerboard of both), ``radial`` (diagonals
    pointing away from the centre), ``antiradial`` (the opposite) or ``crisscross`` (both
    diagonals, four triangles per square). Cells are tagged ``hyp`` (x < 0) and ``ell`` (x > 0).
    """
    if n < 2 or n % 2:
        raise MeshError(f"N must be even so that x=0 and y=0 are mesh lines, got N={n}")
    if diagonal not in RECT_PATTERNS:
        raise MeshError(f"unknown diagonal {diagonal!r}")
    g = np.linspace(lo, hi, n + 1)
    xx, yy = np.meshgrid(g, g, indexing="xy")
    coords = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i] -> vertex at (g[i], g[j])
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    if diagonal == "crisscross":
        vc = len(coords) + np.arange(n * n)
        coords = np.vstack([coords, 0.5 * (coords[v00] + coords[v11])])
        quads = ([v00, v10, vc], [v10, v11, vc], [v11, v01, vc], [v01, v00, vc])
        cells = np.stack([np.column_stack(c) for c in quads], axis=1).reshape(-1, 3)
    else:
        jj, ii = np.divmod(np.arange(n * n), n)
        centre = 0.5 * (coords[v00] + coords[v11]) - 0.5 * (lo + hi)
        up = {
            "up": np.ones(n * n, dtype=bool),
            "down": np.zeros(n * n, dtype=bool),
            "alternating": (ii + jj) % 2 == 0,
            "radial": centre[:, 0] * centre[:, 1] > 0,
            "antiradial": centre[:, 0] * centre[:, 1] < 0,
        }[diagonal][:, None]
        lower = np.where(up, np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
        upper = np.where(up, np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
        cells = np.empty((2 * n * n, 3), dtype=np.int64)
        cells[0::2] = lower
        cells[1::2] = upper
    cx = coords[cells].mean(axis=1)[:, 0]
    tags = {"hyp": cx < 0, "ell": cx > 0}
    return TriMesh(coords, cells, tags, box=((lo, hi), (lo, hi)))


def example1_interval_mesh(n: int) -> IntervalMesh:
    """Mesh of ``(-3pi/2, 3pi/2)`` aligned with the kinks at 0, pi/2 and pi."""
    if n % 6:
        raise MeshError(f"N must be divisible by 6 to align with solution pieces, got N={n}")
    a, b = -1.5 * math.pi, 1.5 * math.pi
    m = build_interval_mesh(a, b, n)
    cx = m.centroids[:, 0]
    m.tags = {"hyp": cx < 0, "par": cx > 0}
    return m
