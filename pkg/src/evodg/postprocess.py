"""Jump-based reconstruction of dG solutions into continuous piecewise P_{q+1} functions.

On slab m the reconstruction is ``U - [[U]]_{m-1} theta_m``, where ``theta_m`` vanishes at the
quadrature nodes of the slab and equals one at its left end. For the transformed variant the
nodes are the plain right Radau points; for the weighted variant they are the rho-dependent
ones, so the same code covers both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolution import DiscreteSolution, _SlabExpansion, lift_exponential
from .quadrature import ThetaPoly
from .space.reference import gauss_interval


@dataclass
class PostprocessedSolution(_SlabExpansion):
    base: DiscreteSolution

    def __post_init__(self):
        M = self.base.time_mesh.M
        self.jumps = np.array([self.base.jump_at(m) for m in range(M)])
        self._thetas = {}

    @property
    def time_mesh(self):
        return self.base.time_mesh

    @property
    def q(self) -> int:
        return self.base.q + 1

    @property
    def rho(self) -> float:
        return self.base.rho

    @property
    def variant(self) -> str:
        return self.base.variant

    def theta(self, m: int) -> ThetaPoly:
        rule = self.base.rules[m]
        key = id(rule)
        if key not in self._thetas:
            self._thetas[key] = ThetaPoly(rule.q, rule.nodes)
        return self._thetas[key]

    def slab_expansion(self, m, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        b = np.column_stack([self.base.basis(m)(s), self.theta(m)(s)])
        c = np.vstack([self.base.values[m], -self.jumps[m][None, :]])
        return b, c

    def derivative(self, m: int, s) -> np.ndarray:
        """Time derivative at reference points ``s`` of slab m, shape (ns, ndofs)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        d = self.base.basis(m).derivative(s) @ self.base.values[m]
        d -= np.outer(self.theta(m).derivative(s), self.jumps[m])
        return d / self.time_mesh.taus[m]

    def left_limit(self, m: int) -> np.ndarray:
        return self.slab_values(m, 1.0)[0]

    def right_limit(self, m: int) -> np.ndarray:
        return self.slab_values(m, 0.0)[0]

    def jump_at(self, m: int) -> np.ndarray:
        prev = self.base.x0 if m == 0 else self.left_limit(m - 1)
        return self.right_limit(m) - prev


def postprocess(solution: DiscreteSolution) -> PostprocessedSolution:
    """Continuous reconstruction of a dG solution of either variant."""
    if solution.q < 0:
        raise ValueError("q must be >= 0")
    return PostprocessedSolution(solution)


def postprocess_weighted(solution: DiscreteSolution) -> PostprocessedSolution:
    """Reconstruction of a weighted-variant solution with the rho-dependent nodes."""
    if solution.variant != "weighted":
        raise ValueError("expected a solution of the weighted variant")
    return PostprocessedSolution(solution)


def lifted_postprocess(solution: DiscreteSolution, rho: float | None = None):
    """``t -> exp(rho t) Vpp(t)`` for a transformed-variant solution ``V``."""
    rho = solution.rho if rho is None else rho
    return lift_exponential(postprocess(solution), rho)


@dataclass
class LiftedJumpCorrection(_SlabExpansion):
    """``exp(rho t) V - [[exp(rho .) V]]_{m-1} theta_m``: the correction applied after lifting.

    Differs from :func:`lifted_postprocess` by the factor ``exp(rho (t - t_{m-1}))`` on the
    correction term; both are continuous and converge at the same rate.
    """

    base: DiscreteSolution
    rho: float

    def __post_init__(self):
        self._pp = PostprocessedSolution(self.base)

    @property
    def time_mesh(self):
        return self.base.time_mesh

    def slab_expansion(self, m, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        tm = self.time_mesh
        t = tm.points[m] + tm.taus[m] * s
        ell = self.base.basis(m)(s) * np.exp(self.rho * t)[:, None]
        th = self._pp.theta(m)(s) * math.exp(self.rho * tm.points[m])
        return np.column_stack([ell, th]), np.vstack([self.base.values[m], -self._pp.jumps[m][None, :]])


def collocation_residual(pp: PostprocessedSolution, problem, rho: float | None = None) -> np.ndarray:
    """Euclidean norms of ``M0 V' + (rho M0 + M1 + A) V - F~`` at every quadrature node.

    Returns an array of shape (M, q+1), relative to ``max_t |F~(t)|`` over the nodes.
    """
    if pp.variant != "transformed":
        raise ValueError("collocation holds for the transformed variant")
    rho = pp.rho if rho is None else rho
    ops = problem.ops
    lin = (rho * ops.M0 + ops.M1 + ops.A).tocsr()
    tm = pp.time_mesh
    out = np.zeros((tm.M, pp.base.q + 1))
    fmax = 0.0
    for m in range(tm.M):
        nodes = pp.base.rules[m].nodes
        t = tm.points[m] + tm.taus[m] * nodes
        val = pp.slab_values(m, nodes)
        der = pp.derivative(m, nodes)
        f = np.array([problem.rhs(float(ti)) for ti in t]) * np.exp(-rho * t)[:, None]
        res = (ops.M0 @ der.T).T + (lin @ val.T).T - f
        out[m] = np.linalg.norm(res, axis=1)
        fmax = max(fmax, float(np.linalg.norm(f, axis=1).max()))
    return out / max(fmax, np.finfo(float).tiny)


def continuity_defects(pp: PostprocessedSolution, M0=None) -> np.ndarray:
    """``|[[V]]_{m-1}|`` (Euclidean, or the M0-seminorm if ``M0`` is given) for every slab."""
    out = []
    for m in range(pp.time_mesh.M):
        j = pp.jump_at(m)
        out.append(math.sqrt(max(float(j @ (M0 @ j)), 0.0)) if M0 is not None else float(np.linalg.norm(j)))
    return np.array(out)


def energy_increments(pp: PostprocessedSolution, M0, n_pts: int | None = None) -> np.ndarray:
    """Per slab: ``int <M0 V', V> dt - (|V(t_m)|^2 - |V(t_{m-1})|^2) / 2`` in the M0-seminorm.

    Vanishes (up to rounding) for a continuous reconstruction, which is what makes the
    reconstruction energy-conserving. The integral uses Gauss points exact for the integrand.
    """
    n_pts = n_pts or pp.q + 1
    s, w = gauss_interval(n_pts)
    tm = pp.time_mesh
    out = np.zeros(tm.M)
    prev = pp.base.x0
    for m in range(tm.M):
        val = pp.slab_values(m, s)
        der = pp.derivative(m, s) * tm.taus[m]
        integral = float(np.dot(w, np.einsum("ij,ij->i", (M0 @ der.T).T, val)))
        end = pp.left_limit(m)
        out[m] = integral - 0.5 * (float(end @ (M0 @ end)) - float(prev @ (M0 @ prev)))
        prev = end
    return out
