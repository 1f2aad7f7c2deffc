import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anchor_sim.errors import InfeasibleError
from anchor_sim.power_time import constraint_rows
from anchor_sim.projection import brute_force_projection, kkt_residuals, project_onto_polytope
from anchor_sim.verify import random_polytope


def _cvxpy_projection(v, a, b):
    z = cp.Variable(v.size)
    cp.Problem(cp.Minimize(cp.sum_squares(z - v)), [a @ z <= b, z >= 0]).solve(
        solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return z.value


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projection_kkt_and_brute_force(seed):
    rng = np.random.default_rng(seed)
    v, a, b = random_polytope(rng)
    res = project_onto_polytope(v, a, b)
    assert max(kkt_residuals(v, a, b, res).values()) < 1e-8
    assert np.allclose(res.z, brute_force_projection(v, a, b), atol=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_projection_matches_cvxpy(seed):
    rng = np.random.default_rng(100 + seed)
    v, a, b = random_polytope(rng, n=6, m=5)
    res = project_onto_polytope(v, a, b)
    assert np.allclose(res.z, _cvxpy_projection(v, a, b), atol=1e-6)


def test_interior_point_is_fixed():
    v = np.array([0.1, 0.2])
    res = project_onto_polytope(v, np.ones((1, 2)), np.array([1.0]))
    assert np.array_equal(res.z, v) and res.active == []


def test_simplex_projection_closed_form():
    # projection onto {sum z <= 1, z >= 0} of a point far outside
    v = np.array([2.0, 1.0, -3.0])
    res = project_onto_polytope(v, np.ones((1, 3)), np.array([1.0]))
    assert np.allclose(res.z, [1.0, 0.0, 0.0], atol=1e-12)


def test_degenerate_duplicate_and_scaled_rows():
    rng = np.random.default_rng(5)
    a = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    b = np.array([1.0, 2.0, 1.0, 0.5])
    for _ in range(50):
        v = rng.standard_normal(3) * 4
        res = project_onto_polytope(v, a, b)
        assert max(kkt_residuals(v, a, b, res).values()) < 1e-8
        assert np.allclose(res.z, _cvxpy_projection(v, a, b), atol=1e-6)


def test_zero_row_with_negative_bound_is_infeasible():
    with pytest.raises(InfeasibleError, match="bad"):
        project_onto_polytope(np.ones(2), np.zeros((1, 2)), np.array([-1.0]), names=["bad"])


def test_empty_polytope_is_infeasible():
    # z >= 0 and z1 + z2 <= -1
    with pytest.raises(InfeasibleError):
        project_onto_polytope(np.ones(2), np.array([[1.0, 1.0]]), np.array([-1.0]))


def test_production_polytope(paper_model, rng):
    a, b, names = constraint_rows(paper_model, paper_model.uniform[1])
    for _ in range(20):
        v = rng.standard_normal(a.shape[1])
        res = project_onto_polytope(v, a, b, names=names)
        assert max(kkt_residuals(v, a, b, res).values()) < 1e-8
        assert np.allclose(res.z, _cvxpy_projection(v, a, b), atol=1e-6)
