import numpy as np
import pytest
from conftest import make_model

from anchor_sim.anchor import (AllocationSolution, AnchorParams, anchor_solve,
                               random_allocation, uniform_allocation)
from anchor_sim.errors import InfeasibleError
from anchor_sim.power_time import ascent_descent_solve
from anchor_sim.scenario import generate_random_scenario


def test_anchor_on_paper_scenario(paper_model):
    sol = anchor_solve(paper_model, rng=np.random.default_rng(0))
    uni = uniform_allocation(paper_model)
    assert sol.check_monotone()
    assert sol.objective_trace[0] == pytest.approx(uni.objective)
    assert sol.objective >= uni.objective
    assert paper_model.is_feasible(sol.z, sol.blocks)
    assert np.all(sol.margins >= -1e-9)
    assert np.all(sol.budget_slacks >= -1e-9)
    assert len(sol.objective_trace) <= 101


def test_anchor_at_least_matches_power_only_ascent(paper_model):
    z0, blocks = paper_model.uniform
    power_only = ascent_descent_solve(paper_model, z0, blocks)
    sol = anchor_solve(paper_model, rng=np.random.default_rng(1))
    assert sol.objective >= power_only.objective * (1 - 1e-9)


def test_anchor_is_deterministic(desk3_model):
    a = anchor_solve(desk3_model, rng=np.random.default_rng(4))
    b = anchor_solve(desk3_model, rng=np.random.default_rng(4))
    assert np.array_equal(a.z, b.z) and a.blocks == b.blocks and a.objective_trace == b.objective_trace


def test_anchor_respects_iteration_cap(paper_model):
    sol = anchor_solve(paper_model, AnchorParams(max_outer_iters=2), np.random.default_rng(0))
    assert len(sol.objective_trace) <= 3


@pytest.mark.parametrize("seed", range(6))
def test_anchor_random_scenarios(seed):
    sc = generate_random_scenario(seed, (2, 2, 1, 2, 3))
    model = make_model(sc)
    sol = anchor_solve(model, rng=np.random.default_rng(seed))
    assert sol.check_monotone()
    assert model.is_feasible(sol.z, sol.blocks)


def test_infeasible_thresholds_raise_naming_user(desk3):
    model = make_model(desk3, thresholds=np.array([0.01, 40.0]))
    with pytest.raises(InfeasibleError) as info:
        anchor_solve(model)
    assert "user 2" in str(info.value)


def test_random_allocation_is_feasible_and_varied(paper_model):
    seen = set()
    for s in range(30):
        sol = random_allocation(paper_model, np.random.default_rng(s))
        assert paper_model.is_feasible(sol.z, sol.blocks)
        seen.add(sol.blocks)
    assert len(seen) > 20


def test_random_allocation_uses_budgets(paper_model):
    sol = random_allocation(paper_model, np.random.default_rng(0))
    assert np.allclose(sol.budget_slacks, 0.0, atol=1e-12)


def test_check_monotone():
    sol = AllocationSolution(np.zeros(1), (), 1.0, objective_trace=[1.0, 2.0, 2.0 - 1e-12, 3.0])
    assert sol.check_monotone()
    sol.objective_trace = [1.0, 2.0, 1.9]
    assert not sol.check_monotone()


def test_params_validation():
    with pytest.raises(ValueError):
        AnchorParams(outer_tol=0.0)
