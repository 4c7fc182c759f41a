"""Benchmark problems with piecewise-analytic exact solutions.

Example 1 lives on ``(-3pi/2, 3pi/2)`` with a hyperbolic part (x < 0) and a parabolic part
(x > 0); Example 2 on ``(-1, 1)^2`` with a hyperbolic half (x < 0) and an elliptic half (x > 0)
and an H(div) flux. Right-hand sides are obtained by applying the operator to the exact
solution piece by piece. Points on piece boundaries belong to the piece on their right
(left-closed pieces); quadrature never samples them on the meshes used here.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .evolution import EvolutionaryProblem
from .space import (
    BlockOperator,
    CellQuadrature,
    LagrangeSpace,
    RaviartThomasSpace,
    assemble_coupling,
    assemble_weighted_mass,
    build_rect_trimesh,
    default_quadrature,
    evaluation_operator,
    example1_interval_mesh,
    load_operator,
    skew_block,
)

PI = math.pi
EXAMPLE2_PATTERN = "crisscross"


@dataclass
class ExampleSpec:
    """Continuous problem data.

    Every evaluator takes ``(t, pts)`` with ``pts`` of shape (n, d) and returns (n,) for
    scalars or (n, 2) for 2D vector fields. ``m0_tags`` / ``m1_tags`` give, per component,
    the subdomain of the indicator multiplier (``None`` = whole domain, ``""`` = zero).
    """

    name: str
    dim: int
    u: Callable
    v: Callable
    f: Callable
    g: Callable
    u_t: Callable
    v_t: Callable
    grad_u: Callable
    div_v: Callable
    m0_tags: tuple
    m1_tags: tuple
    rho0: float = 0.0
    alignment: int = 1
    make_mesh: Callable = None
    make_spaces: Callable = None
    box: tuple = ()
    breaks: tuple = ()  # (axis, value) lines where the solution pieces meet

    def exact(self, t: float, pts: np.ndarray) -> list[np.ndarray]:
        return [self.u(t, pts), self.v(t, pts)]

    @staticmethod
    def region(tag, pts: np.ndarray) -> np.ndarray:
        """Indicator of a subdomain tag at points (``hyp``: x < 0, ``par``/``ell``: x > 0)."""
        x = pts[:, 0]
        if tag is None:
            return np.ones_like(x)
        if tag == "":
            return np.zeros_like(x)
        return (x < 0).astype(float) if tag == "hyp" else (x > 0).astype(float)


def _time_factors(t):
    if t < 0:
        return 0.0, 0.0, 0.0, 0.0
    e = math.exp(t)
    return e - 1.0, e - t - 1.0, e, e - 1.0


# ---------------------------------------------------------------------------
# Example 1


def _ex1_pieces(x):
    hyp = x < 0
    mid = (x >= 0) & (x < PI)
    sgn = np.where(x >= 0.5 * PI, 1.0, -1.0)
    return hyp, mid, sgn


def example1() -> ExampleSpec:
    def u(t, p):
        x = p[:, 0]
        e1, _, _, _ = _time_factors(t)
        _, _, sgn = _ex1_pieces(x)
        return e1 * sgn * np.cos(x)

    def u_t(t, p):
        x = p[:, 0]
        _, _, de1, _ = _time_factors(t)
        _, _, sgn = _ex1_pieces(x)
        return de1 * sgn * np.cos(x)

    def grad_u(t, p):
        x = p[:, 0]
        e1, _, _, _ = _time_factors(t)
        _, _, sgn = _ex1_pieces(x)
        return -e1 * sgn * np.sin(x)

    def v(t, p):
        x = p[:, 0]
        if t < 0:
            return np.zeros_like(x)
        _, e2, _, _ = _time_factors(t)
        hyp, mid, _ = _ex1_pieces(x)
        return np.where(hyp, -e2 * np.sin(x), np.where(mid, x, 2 * PI - x))

    def v_t(t, p):
        x = p[:, 0]
        _, _, _, de2 = _time_factors(t)
        hyp, _, _ = _ex1_pieces(x)
        return np.where(hyp, -de2 * np.sin(x), 0.0)

    def div_v(t, p):
        x = p[:, 0]
        if t < 0:
            return np.zeros_like(x)
        _, e2, _, _ = _time_factors(t)
        hyp, mid, _ = _ex1_pieces(x)
        return np.where(hyp, -e2 * np.cos(x), np.where(mid, 1.0, -1.0))

    def f(t, p):
        return u_t(t, p) + div_v(t, p)

    def g(t, p):
        x = p[:, 0]
        hyp = x < 0
        return np.where(hyp, v_t(t, p), v(t, p)) + grad_u(t, p)

    def make_spaces(mesh, k):
        return LagrangeSpace(mesh, k, dirichlet=True), LagrangeSpace(mesh, k)

    return ExampleSpec(
        name="example1",
        dim=1,
        u=u,
        v=v,
        f=f,
        g=g,
        u_t=u_t,
        v_t=v_t,
        grad_u=grad_u,
        div_v=div_v,
        m0_tags=(None, "hyp"),
        m1_tags=("", "par"),
        rho0=0.0,
        alignment=6,
        make_mesh=example1_interval_mesh,
        make_spaces=make_spaces,
        box=((-1.5 * PI, 1.5 * PI),),
        breaks=((0, 0.0), (0, 0.5 * PI), (0, PI)),
    )


# ---------------------------------------------------------------------------
# Example 2


def _ex2_w(x, y):
    """Flux shape (without time factor) and its divergence, piece by piece."""
    left = x < 0
    low = y < 0
    hp = 0.5 * PI
    w0 = np.select(
        [left & low, left & ~low, ~left & low],
        [np.cos(hp * x) * y, x + y, x * x + y],
        default=y * (1 + x),
    )
    w1 = np.select([left & low, left & ~low], [np.sin(hp * y), -y * y], default=0.0)
    div = np.select(
        [left & low, left & ~low, ~left & low],
        [-hp * np.sin(hp * x) * y + hp * np.cos(hp * y), 1 - 2 * y, 2 * x],
        default=y,
    )
    return np.column_stack([w0, w1]), div


def _ex2_a(x):
    left = x < 0
    a = np.where(left, np.cos(0.5 * PI * x), 1 - x)
    da = np.where(left, -0.5 * PI * np.sin(0.5 * PI * x), -1.0)
    return a, da


def example2(pattern: str = EXAMPLE2_PATTERN) -> ExampleSpec:
    """``pattern`` selects the triangulation of the N x N squares (see ``build_rect_trimesh``)."""

    def u(t, p):
        e1, _, _, _ = _time_factors(t)
        a, _ = _ex2_a(p[:, 0])
        return e1 * a * (1 - np.abs(p[:, 1]))

    def u_t(t, p):
        _, _, de1, _ = _time_factors(t)
        a, _ = _ex2_a(p[:, 0])
        return de1 * a * (1 - np.abs(p[:, 1]))

    def grad_u(t, p):
        e1, _, _, _ = _time_factors(t)
        a, da = _ex2_a(p[:, 0])
        y = p[:, 1]
        sgn = np.where(y < 0, -1.0, 1.0)
        return e1 * np.column_stack([da * (1 - np.abs(y)), -a * sgn])

    def v(t, p):
        _, e2, _, _ = _time_factors(t)
        w, _ = _ex2_w(p[:, 0], p[:, 1])
        return e2 * w

    def v_t(t, p):
        _, _, _, de2 = _time_factors(t)
        w, _ = _ex2_w(p[:, 0], p[:, 1])
        return de2 * w

    def div_v(t, p):
        _, e2, _, _ = _time_factors(t)
        _, d = _ex2_w(p[:, 0], p[:, 1])
        return e2 * d

    def f(t, p):
        hyp = p[:, 0] < 0
        return np.where(hyp, u_t(t, p), u(t, p)) + div_v(t, p)

    def g(t, p):
        hyp = (p[:, 0] < 0)[:, None]
        return np.where(hyp, v_t(t, p), v(t, p)) + grad_u(t, p)

    def make_spaces(mesh, k):
        return LagrangeSpace(mesh, k, dirichlet=True), RaviartThomasSpace(mesh, k - 1)

    return ExampleSpec(
        name="example2",
        dim=2,
        u=u,
        v=v,
        f=f,
        g=g,
        u_t=u_t,
        v_t=v_t,
        grad_u=grad_u,
        div_v=div_v,
        m0_tags=("hyp", "hyp"),
        m1_tags=("ell", "ell"),
        rho0=0.0,
        alignment=2,
        make_mesh=functools.partial(build_rect_trimesh, diagonal=pattern),
        make_spaces=make_spaces,
        box=((-1.0, 1.0), (-1.0, 1.0)),
        breaks=((0, 0.0), (1, 0.0)),
    )


EXAMPLES = {1: example1, 2: example2}


def _fd_divergence(func, t, pts, h):
    total = 0.0
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = h
        diff = (np.asarray(func(t, pts + e)) - np.asarray(func(t, pts - e))) / (2 * h)
        total = total + (diff if diff.ndim == 1 else diff[:, a])
    return total


def check_exact_solution(spec: ExampleSpec, n_points: int = 64, seed: int = 0, h: float = 1e-5) -> float:
    """Largest finite-difference residual of both equations at random points and times.

    Points closer than ``10 h`` to a piece boundary are redrawn. Returns the max absolute residual
    relative to the magnitude of the data.
    """
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in spec.box])
    hi = np.array([b[1] for b in spec.box])
    pts = []
    while len(pts) < n_points:
        p = lo + (hi - lo) * rng.random(len(lo))
        if all(abs(p[a] - v) > 10 * h for a, v in spec.breaks) and np.all(np.abs(p - lo) > 10 * h) and np.all(np.abs(hi - p) > 10 * h):
            pts.append(p)
    pts = np.array(pts)
    worst = 0.0
    scale = 0.0
    for t in rng.uniform(0.05, 1.0, 4):
        dt = lambda fn: (np.asarray(fn(t + h, pts)) - np.asarray(fn(t - h, pts))) / (2 * h)
        m0u, m0v = (spec.region(tag, pts) for tag in spec.m0_tags)
        m1u, m1v = (spec.region(tag, pts) for tag in spec.m1_tags)
        res_f = m0u * dt(spec.u) + m1u * spec.u(t, pts) + _fd_divergence(spec.v, t, pts, h) - spec.f(t, pts)
        if spec.dim == 1:
            grad = (spec.u(t, pts + h) - spec.u(t, pts - h)) / (2 * h)
        else:
            grad = np.column_stack(
                [(spec.u(t, pts + e) - spec.u(t, pts - e)) / (2 * h) for e in (np.array([h, 0.0]), np.array([0.0, h]))]
            )
        mv0 = m0v if spec.dim == 1 else m0v[:, None]
        mv1 = m1v if spec.dim == 1 else m1v[:, None]
        res_g = mv0 * dt(spec.v) + mv1 * spec.v(t, pts) + grad - spec.g(t, pts)
        worst = max(worst, float(np.abs(res_f).max()), float(np.abs(res_g).max()))
        scale = max(scale, float(np.abs(spec.f(t, pts)).max()), float(np.abs(spec.g(t, pts)).max()))
    return worst / max(scale, 1.0)


# ---------------------------------------------------------------------------
# discretization


class FieldSampler:
    """Evaluates composite coefficient vectors and the exact solution at cell quadrature points.

    All norms computed here use the same cell rule, so differences are integrated consistently.
    """

    def __init__(self, spec: ExampleSpec, spaces, offsets, order: int):
        self.spec = spec
        self.spaces = spaces
        self.offsets = offsets
        mesh = spaces[0].mesh
        self.quad = CellQuadrature.build(mesh, order)
        self.points = self.quad.points.reshape(-1, mesh.dim)
        self.weights = self.quad.jxw.ravel()
        npts = self.quad.points.shape[1]
        self.evals = [evaluation_operator(s, self.quad) for s in spaces]
        self.m0_weights = []
        for tag in spec.m0_tags:
            chi = mesh.indicator(tag) if tag != "" else np.zeros(mesh.n_cells)
            self.m0_weights.append(self.weights * np.repeat(chi, npts))

    def exact(self, t: float, scale: float = 1.0) -> list[np.ndarray]:
        """Exact components at the points, each shaped (npts, ncomp)."""
        out = []
        for val in self.spec.exact(t, self.points):
            val = np.asarray(val, dtype=float)
            out.append(scale * (val[:, None] if val.ndim == 1 else val))
        return out

    def discrete(self, coeffs: np.ndarray) -> list[np.ndarray]:
        """Discrete components for coefficient rows ``coeffs`` (nt, ndofs): each (nt, npts, ncomp)."""
        coeffs = np.atleast_2d(coeffs)
        out = []
        for i, ev in enumerate(self.evals):
            c = coeffs[:, self.offsets[i] : self.offsets[i + 1]].T
            out.append(np.stack([e @ c for e in ev], axis=-1).transpose(1, 0, 2))
        return out

    def sq_error(self, times, coeffs, scales=None, m0: bool = False) -> np.ndarray:
        """``||exact(t) * scale - U_h||^2`` in L2(Omega) (or the M0-seminorm) for each time."""
        times = np.atleast_1d(times)
        scales = np.ones(len(times)) if scales is None else np.asarray(scales)
        disc = self.discrete(coeffs)
        out = np.zeros(len(times))
        for j, t in enumerate(times):
            ex = self.exact(float(t), float(scales[j]))
            for i in range(len(self.spaces)):
                w = self.m0_weights[i] if m0 else self.weights
                out[j] += np.einsum("p,pc->", w, (ex[i] - disc[i][j]) ** 2)
        return out

    def sq_norm_exact(self, t: float, m0: bool = False) -> float:
        ex = self.exact(t)
        return float(
            sum(np.einsum("p,pc->", self.m0_weights[i] if m0 else self.weights, ex[i] ** 2) for i in range(len(ex)))
        )


@dataclass
class DiscreteExample(EvolutionaryProblem):
    spec: ExampleSpec = None
    spaces: tuple = ()
    k: int = 1
    N: int = 0

    def interpolate_exact(self, t: float) -> np.ndarray:
        """Interpolant of the exact state at time ``t`` (nodal for Lagrange, canonical for RT)."""
        us, vs = self.spaces
        return np.concatenate([us.interpolate(lambda p: self.spec.u(t, p)), vs.interpolate(lambda p: self.spec.v(t, p))])


def _indicator_mass(space, mesh, tag, quad):
    if tag == "":
        return sp.csr_matrix((space.ndofs, space.ndofs))
    return assemble_weighted_mass(space, mesh.indicator(tag), quad)


def build_discrete_problem(spec: ExampleSpec, N: int, k: int) -> DiscreteExample:
    """Assemble operators and load evaluator of ``spec`` on an ``N``-cell-per-direction mesh."""
    if k < 1:
        raise ValueError("spatial degree k must be >= 1")
    mesh = spec.make_mesh(N)
    us, vs = spec.make_spaces(mesh, k)
    spaces = (us, vs)
    quads = [default_quadrature(s) for s in spaces]
    quad = max(quads, key=lambda q: len(q.ref_weights))
    m0 = sp.block_diag([_indicator_mass(s, mesh, tag, quad) for s, tag in zip(spaces, spec.m0_tags)], format="csr")
    m1 = sp.block_diag([_indicator_mass(s, mesh, tag, quad) for s, tag in zip(spaces, spec.m1_tags)], format="csr")
    mass = sp.block_diag([assemble_weighted_mass(s, None, quad) for s in spaces], format="csr")
    a = skew_block(assemble_coupling(us, vs, quad))
    ops = BlockOperator(spaces, m0, m1, a, mass)

    loads = [load_operator(s, quad) for s in spaces]
    pts = quad.points.reshape(-1, mesh.dim)

    def rhs(t: float) -> np.ndarray:
        t = max(t, 0.0)
        fu = np.asarray(spec.f(t, pts))
        gv = np.asarray(spec.g(t, pts))
        gv = gv[:, None] if gv.ndim == 1 else gv
        part_u = loads[0][0] @ fu
        part_v = sum(loads[1][c] @ gv[:, c] for c in range(gv.shape[1]))
        return np.concatenate([part_u, part_v])

    sampler = FieldSampler(spec, spaces, ops.offsets, 2 * k + 4)
    problem = DiscreteExample(
        ops=ops,
        rhs=rhs,
        x0=np.zeros(ops.ndofs),
        rho0=spec.rho0,
        sampler=sampler,
        meta={"example": spec.name, "N": N, "k": k},
        spec=spec,
        spaces=spaces,
        k=k,
        N=N,
    )
    problem.x0 = problem.interpolate_exact(0.0)
    return problem


def compatibility_residual(problem: EvolutionaryProblem, rho: float) -> float:
    """``|(rho M0 + M1 + A) x0 - F(0+)| / |F(0+)|`` in the Euclidean norm of the load vectors.

    Diagnostic only: neither example satisfies the condition exactly, since the exact
    solutions have a nonzero time derivative at t = 0.
    """
    ops = problem.ops
    f0 = problem.rhs(0.0)
    res = (rho * ops.M0 + ops.M1 + ops.A) @ problem.x0 - f0
    return float(np.linalg.norm(res) / max(np.linalg.norm(f0), np.finfo(float).tiny))
