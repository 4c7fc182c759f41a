"""Error norms, energy audits and experimental orders of convergence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import build_weighted_radau
from .space.reference import gauss_interval

DEFAULT_EXTRA_TIME_POINTS = 5
DEFAULT_SUP_SAMPLES = 10


def _slab_points(time_mesh, m, s):
    return time_mesh.points[m] + time_mesh.taus[m] * np.asarray(s)


def _sq_diff(sampler, approx, m, s, reference=None, scale_fn=None, m0=False, ops=None):
    """Squared spatial norm of ``reference - approx`` at reference points ``s`` of slab m.

    ``reference`` is ``None`` (the exact solution, times ``scale_fn(t)``) or another
    slab-expansion object; discrete differences are measured with the assembled mass matrices.
    """
    t = _slab_points(approx.time_mesh, m, s)
    vals = approx.slab_values(m, s)
    if reference is None:
        scales = None if scale_fn is None else scale_fn(t)
        return sampler.sq_error(t, vals, scales, m0=m0), t
    diff = reference.slab_values(m, s) - vals
    mat = ops.M0 if m0 else ops.mass
    return np.einsum("ti,ti->t", (mat @ diff.T).T, diff), t


def weighted_l2_error(sampler, approx, rho: float, n_time_pts: int | None = None, reference=None,
                      scale_fn=None, ops=None) -> float:
    """``sqrt(int_0^T exp(-2 rho t) ||U - U_h||^2 dt)`` by per-slab Gauss quadrature in time.

    With ``rho = 0`` this is the plain L2(0, T; L2) norm.
    """
    tm = approx.time_mesh
    if n_time_pts is None:
        n_time_pts = _degree_of(approx) + DEFAULT_EXTRA_TIME_POINTS
    s, w = gauss_interval(n_time_pts)
    total = 0.0
    for m in range(tm.M):
        e2, t = _sq_diff(sampler, approx, m, s, reference, scale_fn, False, ops)
        total += tm.taus[m] * np.dot(w * np.exp(-2.0 * rho * t), e2)
    return math.sqrt(total)


def _degree_of(approx) -> int:
    base = approx
    extra = 0
    while hasattr(base, "base"):
        extra += 1 if hasattr(base, "jumps") else 0
        base = base.base
    return getattr(base, "q", 1) + extra


def q_norm_error(sampler, solution, rho: float, reference=None, scale_fn=None, ops=None) -> float:
    """``sqrt(sum_m exp(-2 rho t_{m-1}) Q_m{||e||^2})`` with the rho-weighted Radau rule of each slab."""
    tm = solution.time_mesh
    q = _degree_of(solution)
    total = 0.0
    for m in range(tm.M):
        rule = build_weighted_radau(q, rho * tm.taus[m])
        e2, _ = _sq_diff(sampler, solution, m, rule.nodes, reference, scale_fn, False, ops)
        total += math.exp(-2.0 * rho * tm.points[m]) * tm.taus[m] * np.dot(rule.weights, e2)
    return math.sqrt(total)


def sup_m0_error(sampler, approx, samples_per_slab: int = DEFAULT_SUP_SAMPLES, reference=None,
                 scale_fn=None, ops=None, rho: float = 0.0) -> float:
    """``max_t exp(-rho t) ||M0^{1/2} (U - U_h)(t)||`` over equispaced samples per slab.

    The samples include both one-sided limits at every mesh point. ``M0`` is an indicator
    multiplier here, so ``M0^{1/2}`` is the restriction to its support.
    """
    if samples_per_slab < 8:
        raise ValueError("need at least 8 samples per slab")
    tm = approx.time_mesh
    s = np.linspace(0.0, 1.0, samples_per_slab + 2)
    best = 0.0
    for m in range(tm.M):
        e2, t = _sq_diff(sampler, approx, m, s, reference, scale_fn, True, ops)
        best = max(best, float((e2 * np.exp(-2.0 * rho * t)).max()))
    return math.sqrt(max(best, 0.0))


def jump_error_sum(solution, rho: float, M0) -> float:
    """``sum_m exp(-2 rho t_{m-1}) ||M0^{1/2} [[U_h]]_{m-1}||^2`` (the exact solution has no jumps)."""
    tm = solution.time_mesh
    total = 0.0
    for m in range(tm.M):
        j = solution.jump_at(m)
        total += math.exp(-2.0 * rho * tm.points[m]) * float(j @ (M0 @ j))
    return total


def eoc(errors) -> list:
    """``log2(e_i / e_{i+1})`` for successive doublings; ``None`` where undefined."""
    errors = list(errors)
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a is None or b is None or not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
            out.append(None)
        else:
            out.append(math.log2(a / b))
    return out


@dataclass
class EnergyBalance:
    """Both sides of the discrete energy identity at each mesh point ``t_i``, i = 1..M."""

    times: np.ndarray
    final_energy: np.ndarray
    dissipation: np.ndarray
    jumps: np.ndarray
    initial: float
    work: np.ndarray

    @property
    def lhs(self) -> np.ndarray:
        return self.final_energy + self.dissipation + self.jumps

    @property
    def rhs(self) -> np.ndarray:
        return self.initial + self.work

    @property
    def gap(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def relative_gap(self) -> np.ndarray:
        scale = np.maximum.reduce([np.abs(self.lhs), np.abs(self.rhs), np.abs(self.jumps), np.abs(self.dissipation)])
        return np.abs(self.gap) / np.maximum(scale, np.finfo(float).tiny)


def energy_audit(solution, problem, rho: float | None = None) -> EnergyBalance:
    """Discrete energy identity of the dG scheme, obtained by testing each slab with the solution.

    With ``r`` the quadrature exponent (``rho`` for the weighted variant, 0 for the transformed
    one) and ``L = rho M0 + M1``, at every mesh point t_i::

        e^{-2 r t_i} |U(t_i^-)|_{M0}^2 + 2 sum_m e^{-2 r t_{m-1}} Q_m{<L U, U>}
          + sum_m e^{-2 r t_{m-1}} |[[U]]_{m-1}|_{M0}^2
        = |x0|_{M0}^2 + 2 sum_m e^{-2 r t_{m-1}} Q_m{<F, U>}

    where F is the load of the scheme (``e^{-rho t} F`` for the transformed variant).
    """
    ops = problem.ops
    rho = solution.rho if rho is None else rho
    r = rho if solution.variant == "weighted" else 0.0
    L = rho * ops.M0 + ops.M1
    tm = solution.time_mesh
    M = tm.M
    fe = np.zeros(M)
    diss = np.zeros(M)
    jumps = np.zeros(M)
    work = np.zeros(M)
    acc_d = acc_j = acc_w = 0.0
    for m in range(M):
        slab = solution.slab_rule(m)
        u = solution.values[m]
        f = np.array([problem.rhs(float(t)) for t in slab.nodes])
        if solution.variant == "transformed":
            f *= np.exp(-rho * slab.nodes)[:, None]
        fac = math.exp(-2.0 * r * tm.points[m])
        acc_d += 2.0 * fac * np.dot(slab.weights, np.einsum("ij,ij->i", (L @ u.T).T, u))
        jm = solution.jump_at(m)
        acc_j += fac * float(jm @ (ops.M0 @ jm))
        acc_w += 2.0 * fac * np.dot(slab.weights, np.einsum("ij,ij->i", f, u))
        end = u[-1]
        fe[m] = math.exp(-2.0 * r * tm.points[m + 1]) * float(end @ (ops.M0 @ end))
        diss[m], jumps[m], work[m] = acc_d, acc_j, acc_w
    x0 = solution.x0
    return EnergyBalance(tm.points[1:], fe, diss, jumps, float(x0 @ (ops.M0 @ x0)), work)


@dataclass
class ErrorReport:
    values: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.values.items():
            if v is not None and v < 0:
                raise ValueError(f"negative norm {k}={v}")


@dataclass
class ConvergenceReport:
    """Per-level errors with EOC columns, one row per level."""

    columns: list
    levels: list
    errors: dict  # column -> list of errors per level
    meta: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def rates(self, column: str) -> list:
        return eoc(self.errors[column])

    def to_csv(self, path=None, header: dict | None = None) -> str:
        lines = []
        for key, val in {**self.meta, **(header or {})}.items():
            lines.append(f"# {key} = {val}")
        cols = ["k", "q", "N"]
        for c in self.columns:
            cols += [f"err_{c}", f"rate_{c}"]
        lines.append(",".join(cols))
        rates = {c: [None] + (eoc(self.errors[c]) if len(self.levels) > 1 else []) for c in self.columns}
        for i, n in enumerate(self.levels):
            row = [str(self.meta.get("k", "")), str(self.meta.get("q", "")), str(n)]
            for c in self.columns:
                e = self.errors[c][i]
                r = rates[c][i]
                row.append("" if e is None else f"{e:.3e}")
                row.append("" if r is None else f"{r:.2f}")
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text
