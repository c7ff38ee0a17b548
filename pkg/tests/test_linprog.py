"""Simplex backend against scipy.optimize.linprog on the same instances."""

import numpy as np
import pytest
from scipy.optimize import linprog as scipy_linprog

from bassmt.linprog import INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp


def _scipy_value(c, A, b):
    res = scipy_linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res


def test_tiny_transport_lp():
    # max-covariance LP between {-1,1} (1/2,1/2) and {-2,2} (1/2,1/2):
    # min -x.y over couplings; optimum is the comonotone matching, value -2
    c = -np.array([2.0, -2.0, -2.0, 2.0])
    A = np.array([
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
        [1.0, 0.0, 1.0, 0.0],
    ])
    b = np.array([0.5, 0.5, 0.5])
    res = solve_lp(c, A, b)
    assert res.status == OPTIMAL
    assert abs(res.value - (-2.0)) < 1e-12
    assert np.allclose(res.x, [0.5, 0.0, 0.0, 0.5], atol=1e-12)


def test_infeasible_detected():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])  # inconsistent rows
    assert solve_lp(np.zeros(2), A, b).status == INFEASIBLE


def test_unbounded_detected():
    # min -x1 with x1 - x2 = 0: both can grow without bound
    res = solve_lp(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))
    assert res.status == UNBOUNDED


def test_negative_rhs_rows_are_normalized():
    res = solve_lp(np.array([1.0, 1.0]), np.array([[-1.0, 0.0]]), np.array([-2.0]))
    assert res.status == OPTIMAL
    assert abs(res.value - 2.0) < 1e-12


def test_degenerate_basis_terminates():
    # redundant constraint forces a degenerate pivot; Bland must still finish
    A = np.array([
        [1.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 1.0],
    ])
    b = np.array([1.0, 1.0, 1.0])
    res = solve_lp(np.array([0.0, 1.0, 2.0]), A, b)
    assert res.status == OPTIMAL
    assert abs(res.value - (scipy_linprog(
        np.array([0.0, 1.0, 2.0]), A_eq=A, b_eq=b, bounds=(0, None),
        method="highs").fun)) < 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_random_instances_match_reference(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 6)), int(rng.integers(4, 10))
    A = rng.normal(size=(m, n))
    x_feas = rng.random(n)  # build b so the problem is feasible
    b = A @ x_feas
    c = rng.normal(size=n)
    res = solve_lp(c, A, b)
    ref = _scipy_value(c, A, b)
    if ref.status == 3:
        assert res.status == UNBOUNDED
        return
    assert ref.status == 0
    assert res.status == OPTIMAL
    assert abs(res.value - ref.fun) < 1e-8 * (1.0 + abs(ref.fun))
    assert np.abs(A @ res.x - b).max() < 1e-9
    assert res.x.min() > -1e-12
