"""Space-time dG(q) marching for ``(d/dt M0 + M1 + A) U = F``.

Two variants share one code path:

``weighted``
    quadrature with weight ``exp(-2 rho (t - t_{m-1}))`` on each slab, operator ``M1``, data ``F``.
``transformed``
    for ``V = exp(-rho t) U``: unweighted Radau rule, operator ``rho M0 + M1``,
    data ``exp(-rho t) F``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import LagrangeBasis, SlabRule, build_weighted_radau, map_to_slab
from .space.assembly import BlockOperator

VARIANTS = ("weighted", "transformed")


class SlabSolveError(RuntimeError):
    pass


@dataclass
class EvolutionaryProblem:
    """Semi-discrete problem: block operators, load evaluator, initial state.

    ``rhs(t)`` returns the assembled load vector of ``F(t)`` (right limit at t = 0).
    ``sampler`` (optional) compares coefficient vectors with the exact solution.
    """

    ops: BlockOperator
    rhs: Callable[[float], np.ndarray]
    x0: np.ndarray
    rho0: float = 0.0
    sampler: object = None
    meta: dict = field(default_factory=dict)

    @property
    def ndofs(self) -> int:
        return self.ops.ndofs


@dataclass(frozen=True)
class TimeMesh:
    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or len(p) < 2 or np.any(np.diff(p) <= 0):
            raise ValueError("time mesh must be strictly increasing with at least one slab")
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, T: float, M: int) -> "TimeMesh":
        return cls(np.linspace(0.0, T, M + 1))

    @property
    def M(self) -> int:
        return len(self.points) - 1

    @property
    def taus(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def T(self) -> float:
        return float(self.points[-1])

    def growth(self) -> float:
        """Largest ratio tau_m / tau_{m-1}."""
        t = self.taus
        return float(np.max(t[1:] / t[:-1])) if len(t) > 1 else 1.0

    def check_growth(self, limit: float) -> None:
        if self.growth() > limit:
            raise ValueError(f"time mesh growth {self.growth():.3g} exceeds {limit}")

    def slab_of(self, t: float, side: str = "left") -> int:
        """0-based slab containing ``t``; slabs are ``(t_m, t_{m+1}]``.

        ``side='left'`` returns the slab whose closure ends at ``t`` for mesh points,
        ``side='right'`` the slab starting there.
        """
        p = self.points
        if side == "left":
            m = int(np.searchsorted(p, t, side="left")) - 1
        else:
            m = int(np.searchsorted(p, t, side="right")) - 1
        return int(np.clip(m, 0, self.M - 1))


class _SlabExpansion:
    """Shared evaluation logic for slab-wise polynomial-like time functions.

    Subclasses implement ``slab_expansion(m, s) -> (B, C)`` with ``B`` of shape (ns, nb)
    and ``C`` of shape (nb, ndofs), so that the value at ``t_m + s tau_m`` is ``B @ C``.
    """

    time_mesh: TimeMesh

    def slab_values(self, m: int, s) -> np.ndarray:
        b, c = self.slab_expansion(m, np.atleast_1d(s))
        return b @ c

    def __call__(self, t: float, side: str = "left") -> np.ndarray:
        tm = self.time_mesh
        m = tm.slab_of(t, side)
        s = (t - tm.points[m]) / tm.taus[m]
        return self.slab_values(m, s)[0]


@dataclass
class DiscreteSolution(_SlabExpansion):
    """Nodal values ``values[m, i]`` at ``t_m + tau_m s_i`` (0-based slab ``m``)."""

    time_mesh: TimeMesh
    q: int
    rho: float
    variant: str
    rules: list
    values: np.ndarray  # (M, q+1, n)
    x0: np.ndarray

    def __post_init__(self):
        self._bases = {}

    def basis(self, m: int) -> LagrangeBasis:
        rule = self.rules[m]
        key = id(rule)
        if key not in self._bases:
            self._bases[key] = LagrangeBasis(rule.nodes)
        return self._bases[key]

    def slab_expansion(self, m, s):
        return self.basis(m)(s), self.values[m]

    def slab_rule(self, m: int) -> SlabRule:
        tm = self.time_mesh
        rho_q = self.rho if self.variant == "weighted" else 0.0
        return map_to_slab(self.rules[m], tm.points[m], tm.taus[m], rho_q)

    def left_limit(self, m: int) -> np.ndarray:
        """Value at ``t_{m+1}^-`` (end of 0-based slab m)."""
        return self.values[m, -1]

    def right_limit(self, m: int) -> np.ndarray:
        """Value at ``t_m^+`` (start of 0-based slab m)."""
        return (self.basis(m)(0.0) @ self.values[m])[0]

    def jump_at(self, m: int) -> np.ndarray:
        """``U(t_m^+) - U(t_m^-)`` for 0-based slab m, with ``U(t_0^-) = x0``."""
        prev = self.x0 if m == 0 else self.left_limit(m - 1)
        return self.right_limit(m) - prev

    def derivative_at_nodes(self, m: int) -> np.ndarray:
        """Time derivative at the slab's nodes, shape (q+1, n)."""
        d = self.basis(m).derivative(self.rules[m].nodes)
        return d @ self.values[m] / self.time_mesh.taus[m]


def jump(solution: DiscreteSolution, m: int) -> np.ndarray:
    """Jump at ``t_{m-1}`` for 1-based slab index ``m`` (``x0`` is the state before t = 0)."""
    if not 1 <= m <= solution.time_mesh.M:
        raise IndexError(f"slab index {m} outside 1..{solution.time_mesh.M}")
    return solution.jump_at(m - 1)


@dataclass
class LiftedSolution(_SlabExpansion):
    """``t -> exp(rho t) V(t)``; not piecewise polynomial."""

    base: object
    rho: float

    @property
    def time_mesh(self):
        return self.base.time_mesh

    def slab_expansion(self, m, s):
        b, c = self.base.slab_expansion(m, s)
        t = self.time_mesh.points[m] + self.time_mesh.taus[m] * np.asarray(s)
        return b * np.exp(self.rho * t)[:, None], c


def lift_exponential(solution, rho: float) -> LiftedSolution:
    return LiftedSolution(solution, float(rho))


# ---------------------------------------------------------------------------
# slab solver


def _sparse_lu(mat: sp.spmatrix):
    """LU with a fill-reducing symmetric ordering and diagonal pivots.

    The slab blocks have a symmetric pattern and a positive definite symmetric part, so
    diagonal pivoting is safe; partial pivoting is the fallback if a probe solve is inaccurate.
    """
    mat = mat.tocsc()
    probe = np.linspace(1.0, 2.0, mat.shape[0])
    try:
        lu = spla.splu(mat, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        x = lu.solve(probe.astype(mat.dtype))
        if np.all(np.isfinite(x)) and np.linalg.norm(mat @ x - probe) <= 1e-8 * np.linalg.norm(probe):
            return lu
    except RuntimeError:
        pass
    return spla.splu(mat)


def temporal_matrices(rule) -> tuple[np.ndarray, np.ndarray]:
    """``K[i, j] = w_i l_j'(s_i) + l_i(0) l_j(0)`` and ``l(0)`` on the reference slab."""
    basis = LagrangeBasis(rule.nodes)
    d = basis.derivative(rule.nodes)  # d[i, j] = l_j'(s_i)
    l0 = basis(0.0)[0]
    k = rule.weights[:, None] * d + np.outer(l0, l0)
    return k, l0


class SlabSolver:
    """Assembles and factors slab systems; factorizations are reused for repeated (tau, sigma)."""

    def __init__(self, problem: EvolutionaryProblem, q: int, rho: float, variant: str):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.problem = problem
        self.q = q
        self.rho = rho
        self.variant = variant
        ops = problem.ops
        self.M0 = ops.M0.tocsr()
        if variant == "weighted":
            self.m_lin = ops.M1
            self.rho_quad = rho
        else:
            self.m_lin = rho * ops.M0 + ops.M1
            self.rho_quad = 0.0
        self.spatial = (self.m_lin + ops.A).tocsr()
        self._factors = {}

    def rule_for(self, tau: float):
        return build_weighted_radau(self.q, self.rho_quad * tau)

    def forcing(self, t: np.ndarray) -> np.ndarray:
        f = np.array([self.problem.rhs(float(ti)) for ti in t])
        if self.variant == "transformed":
            f *= np.exp(-self.rho * t)[:, None]
        return f

    def _factor(self, tau: float, rule):
        """Decoupled factorization of the slab system.

        Scaling row i by ``1 / w_i`` turns the slab matrix into ``G (x) M0 + tau I (x) S`` with
        ``G = diag(w)^{-1} K``. Diagonalizing ``G = V diag(lam) V^{-1}`` leaves q+1 independent
        spatial systems ``(lam_j M0 + tau S)``; conjugate eigenvalues share one factorization.
        """
        key = (round(tau, 14), round(rule.sigma, 14))
        if key not in self._factors:
            k, l0 = temporal_matrices(rule)
            g = k / rule.weights[:, None]
            lam, vec = np.linalg.eig(g)
            order = np.lexsort((lam.imag, lam.real))
            lam, vec = lam[order], vec[:, order]
            vinv = np.linalg.inv(vec)
            lus = []
            for j, lj in enumerate(lam):
                partner = next((i for i in range(j) if abs(lam[i] - np.conj(lj)) <= 1e-10 * abs(lj) and lam[i].imag != 0), None)
                if partner is not None:
                    lus.append(("conj", partner))
                    continue
                real = abs(lj.imag) <= 1e-14 * abs(lj)
                mat = (lj.real if real else lj) * self.M0 + tau * self.spatial
                try:
                    lus.append(("lu", _sparse_lu(mat)))
                except RuntimeError as exc:
                    raise SlabSolveError(f"slab matrix singular for tau={tau}: {exc}") from exc
            self._factors.clear()
            self._factors[key] = (lus, vec, vinv, l0)
        return self._factors[key]

    def solve(self, slab: SlabRule, u_prev: np.ndarray, slab_index: int | None = None) -> np.ndarray:
        rule = slab.rule
        lus, vec, vinv, l0 = self._factor(slab.tau, rule)
        f = self.forcing(slab.nodes)
        # rows scaled by 1 / w_i (reference weights), then rotated into the eigenbasis
        b = (slab.weights[:, None] * f + np.outer(l0, self.M0 @ u_prev)) / rule.weights[:, None]
        b = vinv @ b
        y = np.empty(b.shape, dtype=complex)
        for j, (kind, item) in enumerate(lus):
            if kind == "conj":
                y[j] = np.conj(y[item])
            elif item.U.dtype.kind == "c":
                y[j] = item.solve(b[j].astype(complex))
            else:
                y[j] = item.solve(np.ascontiguousarray(b[j].real)) + 1j * item.solve(np.ascontiguousarray(b[j].imag))
        x = (vec @ y).real
        if not np.all(np.isfinite(x)):
            raise SlabSolveError(f"non-finite solution on slab {slab_index}")
        return x


def solve_slab(problem: EvolutionaryProblem, slab: SlabRule, u_prev: np.ndarray, variant: str = "weighted", rho: float | None = None) -> np.ndarray:
    """Nodal values of the dG solution on one slab given the incoming state ``u_prev``."""
    if rho is None:
        rho = slab.rho if variant == "weighted" else 0.0
    solver = SlabSolver(problem, slab.rule.q, rho, variant)
    expected = solver.rho_quad * slab.tau
    if abs(slab.rule.sigma - expected) > 1e-12 * max(1.0, expected):
        raise ValueError(f"slab rule sigma={slab.rule.sigma} does not match variant (expected {expected})")
    return solver.solve(slab, u_prev)


def march(problem: EvolutionaryProblem, time_mesh: TimeMesh, q: int, rho: float, variant: str = "weighted") -> DiscreteSolution:
    """Solve slab by slab; returns nodal values on every slab."""
    if q < 0:
        raise ValueError("q must be >= 0")
    if rho < problem.rho0:
        raise ValueError(f"rho={rho} below admissibility threshold rho0={problem.rho0}")
    solver = SlabSolver(problem, q, rho, variant)
    M = time_mesh.M
    values = np.empty((M, q + 1, problem.ndofs))
    rules = []
    u_prev = np.asarray(problem.x0, dtype=float)
    for m in range(M):
        tau = time_mesh.taus[m]
        rule = solver.rule_for(tau)
        slab = map_to_slab(rule, time_mesh.points[m], tau, solver.rho_quad)
        try:
            values[m] = solver.solve(slab, u_prev, m)
        except SlabSolveError as exc:
            raise SlabSolveError(f"slab {m + 1}/{M}: {exc}") from exc
        rules.append(rule)
        u_prev = values[m, -1]
    return DiscreteSolution(time_mesh, q, float(rho), variant, rules, values, np.asarray(problem.x0, dtype=float))


# ---------------------------------------------------------------------------
# checkpoints


def dump_solution(solution: DiscreteSolution, path) -> None:
    """CSV checkpoint: ``#``-prefixed JSON metadata, then rows ``slab,node,t,dof_0,...``."""
    tm = solution.time_mesh
    meta = {
        "q": solution.q,
        "rho": solution.rho,
        "variant": solution.variant,
        "time_mesh": tm.points.tolist(),
        "x0": solution.x0.tolist(),
    }
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta) + "\n")
        w = csv.writer(fh)
        n = solution.values.shape[2]
        w.writerow(["slab", "node", "t"] + [f"dof_{j}" for j in range(n)])
        for m in range(tm.M):
            t = tm.points[m] + tm.taus[m] * solution.rules[m].nodes
            for i in range(solution.q + 1):
                w.writerow([m + 1, i, repr(float(t[i]))] + [repr(float(x)) for x in solution.values[m, i]])


def load_solution(path) -> DiscreteSolution:
    with open(path) as fh:
        meta = json.loads(fh.readline()[1:])
        rows = list(csv.reader(fh))[1:]
    tm = TimeMesh(np.array(meta["time_mesh"]))
    q, rho, variant = meta["q"], meta["rho"], meta["variant"]
    data = np.array([[float(x) for x in r[3:]] for r in rows])
    values = data.reshape(tm.M, q + 1, -1)
    rho_q = rho if variant == "weighted" else 0.0
    rules = [build_weighted_radau(q, rho_q * tau) for tau in tm.taus]
    return DiscreteSolution(tm, q, rho, variant, rules, values, np.array(meta["x0"]))
