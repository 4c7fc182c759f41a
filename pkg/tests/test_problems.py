import math

import numpy as np
import pytest

from evodg.problems import (
    EXAMPLES,
    _ex2_w,
    build_discrete_problem,
    check_exact_solution,
    compatibility_residual,
    example1,
    example2,
)
from evodg.space import MeshError

E = math.e


@pytest.mark.parametrize("ex", [1, 2])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_solution_satisfies_pde(ex, seed):
    assert check_exact_solution(EXAMPLES[ex](), n_points=100, seed=seed) < 1e-6


def test_example1_values():
    s = example1()
    assert math.isclose(s.u(1.0, np.array([[math.pi]]))[0], -(E - 1), rel_tol=1e-14)
    assert math.isclose(s.v(1.0, np.array([[0.5 * math.pi]]))[0], 0.5 * math.pi, rel_tol=1e-14)
    x = np.linspace(-1.5 * math.pi, 1.5 * math.pi, 41)[:, None]
    assert np.all(s.u(0.0, x) == 0.0)
    # homogeneous Dirichlet condition
    assert np.allclose(s.u(0.7, np.array([[-1.5 * math.pi], [1.5 * math.pi]])), 0.0, atol=1e-15)


def test_example1_u_is_continuous_at_sign_switch():
    s = example1()
    x = 0.5 * math.pi
    a, b = s.u(0.8, np.array([[x - 1e-12], [x]]))
    assert abs(a - b) < 1e-11


def test_example2_values():
    s = example2()
    assert math.isclose(s.u(1.0, np.array([[-0.5, 0.0]]))[0], (E - 1) * math.cos(-math.pi / 4), rel_tol=1e-14)
    t = 0.6
    side = np.linspace(-1, 1, 11)
    bnd = np.concatenate([np.column_stack([side, -np.ones(11)]), np.column_stack([side, np.ones(11)]),
                          np.column_stack([-np.ones(11), side]), np.column_stack([np.ones(11), side])])
    assert np.abs(s.u(t, bnd)).max() < 1e-15


def test_example2_flux_normal_continuity():
    eps = 1e-13
    # across x = 0: first component
    y = np.linspace(-0.95, 0.95, 9)
    left, _ = _ex2_w(np.full_like(y, -eps), y)
    right, _ = _ex2_w(np.full_like(y, eps), y)
    np.testing.assert_allclose(left[:, 0], right[:, 0], atol=1e-12)
    assert math.isclose(_ex2_w(np.array([-eps]), np.array([-0.5]))[0][0, 0], -0.5, abs_tol=1e-12)
    # across y = 0: second component
    x = np.linspace(-0.95, 0.95, 9)
    low, _ = _ex2_w(x, np.full_like(x, -eps))
    high, _ = _ex2_w(x, np.full_like(x, eps))
    np.testing.assert_allclose(low[:, 1], high[:, 1], atol=1e-12)


def test_example2_divergence_matches_branch_derivatives():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.99, 0.99, (200, 2))
    pts = pts[(np.abs(pts) > 1e-3).all(axis=1)]
    h = 1e-6
    _, div = _ex2_w(pts[:, 0], pts[:, 1])
    fd = (
        (_ex2_w(pts[:, 0] + h, pts[:, 1])[0][:, 0] - _ex2_w(pts[:, 0] - h, pts[:, 1])[0][:, 0])
        + (_ex2_w(pts[:, 0], pts[:, 1] + h)[0][:, 1] - _ex2_w(pts[:, 0], pts[:, 1] - h)[0][:, 1])
    ) / (2 * h)
    np.testing.assert_allclose(div, fd, atol=1e-7)


def test_dof_counts():
    p = build_discrete_problem(example1(), 192, 1)
    assert [s.ndofs for s in p.spaces] == [191, 193]
    up = build_discrete_problem(example2(pattern="up"), 2, 1)
    assert up.spaces[0].ndofs == 1
    cc = build_discrete_problem(example2(), 2, 1)
    assert cc.spaces[0].ndofs == 1 + 4  # one grid vertex plus four square centres


@pytest.mark.parametrize("ex, N", [(1, 12), (2, 4)])
def test_initial_value_vanishes_on_m0_support(ex, N):
    p = build_discrete_problem(EXAMPLES[ex](), N, 2)
    assert np.abs(p.ops.M0 @ p.x0).max() < 1e-14


def test_alignment_is_enforced():
    with pytest.raises(MeshError):
        build_discrete_problem(example1(), 100, 1)
    with pytest.raises(MeshError):
        build_discrete_problem(example2(), 5, 1)
    with pytest.raises(ValueError):
        build_discrete_problem(example1(), 12, 0)


@pytest.mark.parametrize("ex, N", [(1, 24), (2, 4)])
def test_operator_structure(ex, N):
    p = build_discrete_problem(EXAMPLES[ex](), N, 2)
    ops = p.ops
    assert abs(ops.A + ops.A.T).max() <= 1e-12 * abs(ops.A).max()
    assert abs(ops.M0 - ops.M0.T).max() == 0 and abs(ops.M1 - ops.M1.T).max() == 0
    for rho in (1.0, 2.0):
        np.linalg.cholesky((rho * ops.M0 + ops.M1).toarray())
    assert ops.gamma(0.5) == 0.5


def test_load_matches_exact_solution_in_weak_form():
    # (d/dt M0 + M1 + A) applied to the interpolated exact state approximates the load
    p = build_discrete_problem(example1(), 384, 2)
    t, h = 0.6, 1e-5
    x = p.interpolate_exact(t)
    dx = (p.interpolate_exact(t + h) - p.interpolate_exact(t - h)) / (2 * h)
    res = p.ops.M0 @ dx + (p.ops.M1 + p.ops.A) @ x - p.rhs(t)
    assert np.linalg.norm(res) < 1e-4 * np.linalg.norm(p.rhs(t))


def test_compatibility_diagnostic():
    # the exact solutions start with a nonzero time derivative, so the condition fails
    assert compatibility_residual(build_discrete_problem(example1(), 12, 1), 2.0) > 0.1


def test_sampler_norms_of_interpolant_converge():
    errs = []
    for N in (12, 24):
        p = build_discrete_problem(example1(), N, 2)
        errs.append(math.sqrt(p.sampler.sq_error([0.5], p.interpolate_exact(0.5)[None, :])[0]))
    assert abs(math.log2(errs[0] / errs[1]) - 3) < 0.3
