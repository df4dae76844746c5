import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from dbcsched.lp import maximize


def test_textbook_example():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), value 36
    r = maximize([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert r.status == "optimal"
    np.testing.assert_allclose(r.x, [2, 6], atol=1e-12)
    assert r.value == pytest.approx(36)


def test_equality_constraint():
    r = maximize([1, 2, 0], A_eq=[[1, 1, 1]], b_eq=[1])
    assert r.status == "optimal"
    np.testing.assert_allclose(r.x, [0, 1, 0], atol=1e-12)


def test_negative_rhs():
    # x >= 1 written as -x <= -1
    r = maximize([-1], [[-1]], [-1])
    assert r.status == "optimal" and r.x[0] == pytest.approx(1)


def test_infeasible():
    assert maximize([1, 1], [[1, 1]], [1], [[1, 1]], [2]).status == "infeasible"


def test_unbounded():
    assert maximize([1, 0], [[0, 1]], [1]).status == "unbounded"


def test_redundant_equalities():
    r = maximize([1, 1], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert r.status == "optimal" and r.value == pytest.approx(1)


def test_degenerate_does_not_cycle():
    # classic Beale cycling instance (rewritten as a max problem)
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    r = maximize(c, A, [0, 0, 1])
    assert r.status == "optimal" and r.value == pytest.approx(0.05)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_scipy(seed):
    _compare_with_scipy(seed)


@pytest.mark.parametrize("seed", [447])
def test_presolve_regression(seed):
    _compare_with_scipy(seed)


def scipy_oracle(c, A_ub, b_ub, A_eq, b_eq):
    """Status and value for max c.x via HiGHS, settling the status with two auxiliary LPs.

    HiGHS alone occasionally calls an unbounded problem infeasible (with
    presolve) or gives up on it (without), so feasibility comes from a
    zero-objective solve and unboundedness from the best recession direction
    d >= 0, A_ub d <= 0, A_eq d = 0, sum d = 1.
    """
    n = c.size
    feas = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if feas.status == 2:
        return "infeasible", None
    assert feas.status == 0, feas.message
    m_eq = 0 if A_eq is None else A_eq.shape[0]
    ray_eq = np.vstack([A_eq, np.ones((1, n))]) if m_eq else np.ones((1, n))
    ray = linprog(
        -c,
        A_ub=A_ub,
        b_ub=None if A_ub is None else np.zeros(A_ub.shape[0]),
        A_eq=ray_eq,
        b_eq=np.r_[np.zeros(m_eq), 1.0],
        bounds=(0, None),
        method="highs",
    )
    if ray.status == 0 and -ray.fun > 1e-9:
        return "unbounded", None
    opt = linprog(-c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert opt.status == 0, opt.message
    return "optimal", -opt.fun


def _compare_with_scipy(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = int(rng.integers(1, 7)), int(rng.integers(0, 5)), int(rng.integers(0, 3))
    c = rng.normal(size=n)
    A_ub = rng.normal(size=(m_ub, n)) if m_ub else None
    b_ub = rng.normal(size=m_ub) + 1.0 if m_ub else None
    A_eq = rng.normal(size=(m_eq, n)) if m_eq else None
    b_eq = rng.normal(size=m_eq) if m_eq else None
    ours = maximize(c, A_ub, b_ub, A_eq, b_eq)
    expected, value = scipy_oracle(c, A_ub, b_ub, A_eq, b_eq)
    assert ours.status == expected
    if expected == "optimal":
        assert ours.value == pytest.approx(value, rel=1e-7, abs=1e-8)
        if m_ub:
            assert np.all(A_ub @ ours.x <= b_ub + 1e-8)
        if m_eq:
            np.testing.assert_allclose(A_eq @ ours.x, b_eq, atol=1e-8)
