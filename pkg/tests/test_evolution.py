import math

import numpy as np
import pytest
import scipy.sparse as sp

from evodg.evolution import (
    EvolutionaryProblem,
    SlabSolveError,
    TimeMesh,
    dump_solution,
    jump,
    lift_exponential,
    load_solution,
    march,
    solve_slab,
    temporal_matrices,
)
from evodg.problems import build_discrete_problem, example1
from evodg.quadrature import build_weighted_radau, map_to_slab
from evodg.space import BlockOperator


def ode_problem(m0, m1, a=None, rhs=None, x0=None, rho0=0.0):
    m0 = sp.csr_matrix(np.atleast_2d(m0))
    n = m0.shape[0]
    m1 = sp.csr_matrix(np.atleast_2d(m1))
    a = sp.csr_matrix((n, n)) if a is None else sp.csr_matrix(a)
    ops = BlockOperator((), m0, m1, a, sp.identity(n, format="csr"), offsets=(0, n))
    rhs = rhs or (lambda t: np.zeros(n))
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    return EvolutionaryProblem(ops, rhs, x0, rho0)


def test_time_mesh_validation():
    with pytest.raises(ValueError):
        TimeMesh(np.array([0.0]))
    with pytest.raises(ValueError):
        TimeMesh(np.array([0.0, 0.5, 0.5, 1.0]))
    tm = TimeMesh(np.array([0.0, 0.1, 0.3, 1.0]))
    assert tm.M == 3 and math.isclose(tm.growth(), 3.5)
    with pytest.raises(ValueError):
        tm.check_growth(2.0)
    assert tm.slab_of(0.1, "left") == 0 and tm.slab_of(0.1, "right") == 1


def test_temporal_matrix_is_exact_time_mass_plus_jump():
    rule = build_weighted_radau(2, 0.0)
    k, l0 = temporal_matrices(rule)
    # K applied to nodal values of p(s) = s^2: Q{p' l_i} + l_i(0) p(0)
    s = rule.nodes
    rhs = rule.weights * 2 * s
    np.testing.assert_allclose(k @ s**2, rhs, atol=1e-14)
    np.testing.assert_allclose(l0.sum(), 1.0)


@pytest.mark.parametrize("q", [0, 1, 3])
def test_constant_state_is_preserved(q):
    prob = ode_problem(1.0, 0.0, x0=[1.0])
    sol = march(prob, TimeMesh.uniform(1.0, 5), q, 0.7)
    np.testing.assert_allclose(sol.values, 1.0, atol=1e-13)


def test_hand_solved_implicit_euler_step():
    # q = 0 transformed: (1 + tau (rho + 1)) U = u_prev
    tau, rho = 0.25, 2.0
    prob = ode_problem(1.0, 1.0, x0=[3.0])
    sol = march(prob, TimeMesh.uniform(tau, 1), 0, rho, "transformed")
    assert math.isclose(sol.values[0, 0, 0], 3.0 / (1 + tau * (rho + 1)), rel_tol=1e-14)


@pytest.mark.parametrize("q", [1, 2, 4])
@pytest.mark.parametrize("variant", ["weighted", "transformed"])
def test_polynomial_solution_is_reproduced(q, variant):
    """u' = 1 with u(0) = 0 has u = t; for the transformed variant V = e^{-rho t} t is not polynomial,
    so there we use a load making V(t) = t^q exact."""
    rho = 1.5
    if variant == "weighted":
        prob = ode_problem(1.0, 0.0, rhs=lambda t: np.array([1.0]))
        exact = lambda t: t
    else:
        # V' + rho V = q t^{q-1} + rho t^q  <=>  F = e^{rho t}(...)
        prob = ode_problem(1.0, 0.0, rhs=lambda t: np.array([math.exp(rho * t) * (q * t ** (q - 1) + rho * t**q)]))
        exact = lambda t: t**q
    tm = TimeMesh(np.array([0.0, 0.2, 0.5, 0.6, 1.0]))
    sol = march(prob, tm, q, rho, variant)
    for m in range(tm.M):
        t = tm.points[m] + tm.taus[m] * sol.rules[m].nodes
        np.testing.assert_allclose(sol.values[m, :, 0], exact(t), atol=1e-12)
        assert np.allclose(sol.jump_at(m), 0.0, atol=1e-12)


def test_polynomial_reproduction_with_skew_coupling():
    # (u, v)' + [[0, 1], [-1, 0]] (u, v) = F for u = t^2, v = t
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rhs = lambda t: np.array([2 * t + t, 1.0 - t**2])
    prob = ode_problem(np.eye(2), np.zeros((2, 2)), a, rhs)
    sol = march(prob, TimeMesh.uniform(1.0, 3), 2, 1.0)
    for m in range(3):
        t = sol.time_mesh.points[m] + sol.time_mesh.taus[m] * sol.rules[m].nodes
        np.testing.assert_allclose(sol.values[m], np.column_stack([t**2, t]), atol=1e-12)


def test_zero_data_gives_zero_solution():
    prob = build_discrete_problem(example1(), 12, 1)
    prob.rhs = lambda t: np.zeros(prob.ndofs)
    prob.x0 = np.zeros(prob.ndofs)
    sol = march(prob, TimeMesh.uniform(1.0, 4), 1, 1.0)
    assert np.all(sol.values == 0.0)


def test_causality():
    base = lambda t: np.array([math.sin(t)])
    changed = lambda t: np.array([math.sin(t) + (5.0 if t > 0.5 else 0.0)])
    tm = TimeMesh.uniform(1.0, 4)
    a = march(ode_problem(1.0, 1.0, rhs=base), tm, 2, 1.0)
    b = march(ode_problem(1.0, 1.0, rhs=changed), tm, 2, 1.0)
    np.testing.assert_array_equal(a.values[:2], b.values[:2])
    assert not np.allclose(a.values[2:], b.values[2:])


def test_solve_slab_matches_march_and_checks_sigma():
    prob = ode_problem(1.0, 1.0, rhs=lambda t: np.array([math.cos(t)]), x0=[0.3])
    sol = march(prob, TimeMesh.uniform(0.5, 1), 2, 2.0)
    rule = build_weighted_radau(2, 1.0)
    slab = map_to_slab(rule, 0.0, 0.5, 2.0)
    np.testing.assert_allclose(solve_slab(prob, slab, prob.x0), sol.values[0], rtol=1e-13)
    with pytest.raises(ValueError):
        solve_slab(prob, slab, prob.x0, variant="transformed", rho=2.0)


def test_rho_below_threshold_is_rejected():
    prob = ode_problem(1.0, 0.0, rho0=1.0)
    with pytest.raises(ValueError):
        march(prob, TimeMesh.uniform(1.0, 2), 0, 0.5)
    with pytest.raises(ValueError):
        march(prob, TimeMesh.uniform(1.0, 2), 0, 1.0, "implicit")


def test_singular_slab_matrix_is_reported():
    # M0 = 0, M1 = 0, A = 0 makes every slab system singular
    prob = ode_problem(0.0, 0.0)
    with pytest.raises(SlabSolveError):
        march(prob, TimeMesh.uniform(1.0, 2), 0, 1.0)


def test_jumps_and_limits():
    prob = ode_problem(1.0, 1.0, x0=[1.0])
    sol = march(prob, TimeMesh.uniform(1.0, 3), 0, 1.0)
    # q = 0: piecewise constants, jumps are increments
    vals = sol.values[:, 0, 0]
    assert math.isclose(jump(sol, 1)[0], vals[0] - 1.0)
    assert math.isclose(jump(sol, 3)[0], vals[2] - vals[1])
    with pytest.raises(IndexError):
        jump(sol, 0)
    assert math.isclose(sol(0.5)[0], vals[1])


def test_lift_exponential():
    prob = ode_problem(1.0, 0.0, x0=[1.0])
    sol = march(prob, TimeMesh.uniform(1.0, 2), 1, 1.0, "transformed")
    # V' + V = 0 is approximated; lifting with rho = 0 is the identity
    assert np.allclose(lift_exponential(sol, 0.0)(0.7), sol(0.7))
    ones = march(ode_problem(1.0, 0.0, x0=[1.0]), TimeMesh.uniform(1.0, 2), 1, 0.0, "transformed")
    assert math.isclose(lift_exponential(ones, 1.0)(1.0)[0], math.e, rel_tol=1e-13)


def test_dump_and_load_roundtrip(tmp_path):
    prob = build_discrete_problem(example1(), 12, 2)
    sol = march(prob, TimeMesh.uniform(1.0, 3), 1, 2.0)
    path = tmp_path / "sol.csv"
    dump_solution(sol, path)
    back = load_solution(path)
    np.testing.assert_array_equal(back.values, sol.values)
    np.testing.assert_array_equal(back.x0, sol.x0)
    assert (back.q, back.rho, back.variant) == (1, 2.0, "weighted")
    np.testing.assert_array_equal(back(0.4), sol(0.4))


def test_example1_weighted_matches_reference_value():
    from evodg.analysis import weighted_l2_error

    prob = build_discrete_problem(example1(), 384, 1)
    sol = march(prob, TimeMesh.uniform(1.0, 384), 0, 1.0)
    err = weighted_l2_error(prob.sampler, sol, 1.0)
    assert abs(err / 2.730e-03 - 1) < 0.01
