import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evodg.analysis import (
    ConvergenceReport,
    ErrorReport,
    energy_audit,
    eoc,
    jump_error_sum,
    q_norm_error,
    sup_m0_error,
    weighted_l2_error,
)
from evodg.evolution import DiscreteSolution, TimeMesh, march
from evodg.problems import build_discrete_problem, example1
from evodg.quadrature import build_weighted_radau

from test_evolution import ode_problem


class ScalarSampler:
    """Exact solution ``exact(t)`` on a domain of unit measure, one dof equal to the value.

    ``m0_part`` is the fraction of the error seen by the M0-seminorm.
    """

    def __init__(self, exact, m0_part=1.0):
        self.exact = exact
        self.m0_part = m0_part

    def sq_error(self, times, coeffs, scales=None, m0=False):
        times = np.atleast_1d(times)
        scales = np.ones(len(times)) if scales is None else np.asarray(scales)
        e2 = (scales * self.exact(times) - np.atleast_2d(coeffs)[:, 0]) ** 2
        return self.m0_part * e2 if m0 else e2


def random_solution(q, rho, M=4, n=3, seed=0):
    rng = np.random.default_rng(seed)
    tm = TimeMesh(np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 0.4, M))]))
    rules = [build_weighted_radau(q, rho * tau) for tau in tm.taus]
    vals = rng.standard_normal((M, q + 1, n))
    return DiscreteSolution(tm, q, rho, "weighted", rules, vals, rng.standard_normal(n))


def zero_solution(T=1.0, M=2, q=0):
    tm = TimeMesh.uniform(T, M)
    rules = [build_weighted_radau(q, 0.0) for _ in range(M)]
    return DiscreteSolution(tm, q, 0.0, "transformed", rules, np.zeros((M, q + 1, 1)), np.zeros(1))


# weighted L2 -----------------------------------------------------------------


def test_identical_arguments_give_zero():
    sol = random_solution(2, 1.0)
    ops = type("Ops", (), {"mass": np.eye(3), "M0": np.eye(3)})
    assert weighted_l2_error(None, sol, 1.0, reference=sol, ops=ops) == 0.0
    assert sup_m0_error(None, sol, reference=sol, ops=ops) == 0.0


def test_unit_exact_against_zero():
    S = ScalarSampler(lambda t: np.ones_like(t))
    assert math.isclose(weighted_l2_error(S, zero_solution(), 0.0), 1.0, rel_tol=1e-14)


def test_exponential_exact_with_matching_weight():
    # int_0^1 e^{2t} e^{-2t} dt = 1
    S = ScalarSampler(np.exp)
    assert math.isclose(weighted_l2_error(S, zero_solution(M=3), 1.0, n_time_pts=12), 1.0, rel_tol=1e-13)


def test_scale_function_multiplies_exact():
    S = ScalarSampler(np.exp)
    err = weighted_l2_error(S, zero_solution(), 0.0, scale_fn=lambda t: np.exp(-t))
    assert math.isclose(err, 1.0, rel_tol=1e-14)


# Q-norm -------------------------------------------------------------------------


@pytest.mark.parametrize("q", [0, 1, 3])
@pytest.mark.parametrize("rho", [0.0, 0.8, 3.0])
def test_q_norm_equals_weighted_norm_on_polynomials(q, rho):
    sol = random_solution(q, rho, n=1, seed=q)
    S = ScalarSampler(np.zeros_like)
    exact = weighted_l2_error(S, sol, rho, n_time_pts=q + 20)
    assert abs(q_norm_error(S, sol, rho) - exact) <= 1e-12 * exact


def test_q_norm_of_constant_on_one_slab():
    rho, tau = 1.7, 0.3
    tm = TimeMesh(np.array([0.0, tau]))
    rules = [build_weighted_radau(0, rho * tau)]
    sol = DiscreteSolution(tm, 0, rho, "weighted", rules, np.ones((1, 1, 1)), np.zeros(1))
    S = ScalarSampler(np.zeros_like)
    expected = math.sqrt((1 - math.exp(-2 * rho * tau)) / (2 * rho))
    assert math.isclose(q_norm_error(S, sol, rho), expected, rel_tol=1e-14)
    assert q_norm_error(S, zero_solution(), 0.0) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.01, 3.0), st.integers(0, 3), st.integers(0, 1000))
def test_weighted_norm_monotone_in_rho(rho1, gap, q, seed):
    sol = random_solution(q, rho1, n=1, seed=seed)
    S = ScalarSampler(np.zeros_like)
    rho2 = rho1 + gap
    bound = max(math.exp((rho1 - rho2) * sol.time_mesh.T), 1.0)
    assert weighted_l2_error(S, sol, rho2) <= bound * weighted_l2_error(S, sol, rho1) * (1 + 1e-14)


# sup norm -------------------------------------------------------------------------


def test_sup_norm_requires_enough_samples():
    with pytest.raises(ValueError):
        sup_m0_error(ScalarSampler(np.sin), zero_solution(), samples_per_slab=7)


def test_sup_norm_ignores_error_outside_m0():
    assert sup_m0_error(ScalarSampler(np.exp, m0_part=0.0), zero_solution()) == 0.0


def test_sup_norm_includes_endpoints():
    # |e^t| is largest at t = T, a slab endpoint
    assert math.isclose(sup_m0_error(ScalarSampler(np.exp), zero_solution(M=3)), math.e, rel_tol=1e-14)
    assert math.isclose(sup_m0_error(ScalarSampler(np.exp), zero_solution(M=3), rho=1.0), 1.0, rel_tol=1e-14)


# jumps, eoc ------------------------------------------------------------------------


def test_jump_sum_telescopes_for_piecewise_constants():
    tm = TimeMesh.uniform(1.0, 3)
    rules = [build_weighted_radau(0, 0.0)] * 3
    vals = np.array([1.0, 3.0, 2.0])[:, None, None]
    sol = DiscreteSolution(tm, 0, 0.0, "transformed", rules, vals, np.array([0.0]))
    assert jump_error_sum(sol, 0.0, np.eye(1)) == 1.0 + 4.0 + 1.0
    w = jump_error_sum(sol, 1.0, np.eye(1))
    assert math.isclose(w, 1.0 + 4.0 * math.exp(-2 / 3) + math.exp(-4 / 3))


def test_jump_sum_of_continuous_solution_is_zero():
    prob = ode_problem(1.0, 0.0, rhs=lambda t: np.array([1.0]))
    sol = march(prob, TimeMesh.uniform(1.0, 4), 1, 0.5)
    assert jump_error_sum(sol, 0.5, np.eye(1)) < 1e-28


def test_eoc():
    assert eoc([4.0, 1.0]) == [2.0]
    assert eoc([1.0, 1.0]) == [0.0]
    np.testing.assert_allclose(eoc([5.462e-03, 2.730e-03, 1.364e-03]), [1.00, 1.00], atol=0.005)
    assert eoc([1.0, 0.0, 0.5]) == [None, None]
    assert eoc([None, 0.5]) == [None]
    with pytest.raises(ValueError):
        eoc([1.0])


def test_reports():
    with pytest.raises(ValueError):
        ErrorReport({"a": -1.0})
    rep = ConvergenceReport(["x"], [8, 16, 32], {"x": [1e-2, 2.5e-3, None]}, {"k": 2, "q": 1})
    text = rep.to_csv()
    lines = text.splitlines()
    assert lines[:2] == ["# k = 2", "# q = 1"]
    assert lines[2] == "k,q,N,err_x,rate_x"
    assert lines[3] == "2,1,8,1.000e-02,"
    assert lines[4] == "2,1,16,2.500e-03,2.00"
    assert lines[5] == "2,1,32,,"


# energy identity ---------------------------------------------------------------------


def test_energy_of_zero_solution():
    prob = ode_problem(1.0, 1.0)
    bal = energy_audit(march(prob, TimeMesh.uniform(1.0, 3), 1, 1.0), prob)
    assert np.all(bal.lhs == 0.0) and np.all(bal.rhs == 0.0)


@pytest.mark.parametrize("variant", ["weighted", "transformed"])
@pytest.mark.parametrize("q", [0, 1, 2])
def test_energy_identity_example1(q, variant):
    prob = build_discrete_problem(example1(), 48, q + 1)
    sol = march(prob, TimeMesh.uniform(1.0, 24), q, 1.0, variant)
    bal = energy_audit(sol, prob)
    assert bal.relative_gap.max() <= 1e-10


def test_energy_decays_without_load():
    prob = build_discrete_problem(example1(), 24, 2)
    prob.rhs = lambda t: np.zeros(prob.ndofs)
    prob.x0 = prob.interpolate_exact(1.0)
    bal = energy_audit(march(prob, TimeMesh.uniform(1.0, 12), 1, 1.0), prob)
    e = np.concatenate([[bal.initial], bal.final_energy])
    assert np.all(np.diff(e) <= 0)
    assert np.all(bal.work == 0)
