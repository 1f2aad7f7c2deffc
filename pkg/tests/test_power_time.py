import numpy as np
import pytest
from conftest import make_model
from hypothesis import given, settings, strategies as st

from anchor_sim import power_time as PT
from anchor_sim.anchor import random_allocation
from anchor_sim.scenario import generate_random_scenario
from anchor_sim.verify import central_gradient, random_spd


def _lam(t0):
    return np.diag([1.0, t0, 1.0, t0]), np.diag([1.0, 1.0 / t0, 1.0, 1.0 / t0])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t0=st.floats(0.5, 20))
def test_maximin_identity(seed, t0):
    rng = np.random.default_rng(seed)
    lam, lam_t = _lam(t0)
    b = random_spd(rng)
    v = PT.optimal_v(b, lam_t)
    want = 1.0 / np.trace(lam @ np.linalg.inv(b) @ lam)
    assert PT.maximin_value(v, b, lam_t) == pytest.approx(want, rel=1e-10)
    assert np.trace(v) == pytest.approx(1.0, rel=1e-12)


def test_optimal_v_minimises_over_trace_one_psd():
    rng = np.random.default_rng(0)
    lam, lam_t = _lam(10.0)
    for _ in range(20):
        b = random_spd(rng)
        v = PT.optimal_v(b, lam_t)
        best = PT.maximin_value(v, b, lam_t)
        for _ in range(200):
            a = rng.standard_normal((4, 4))
            w = a @ a.T
            w /= np.trace(w)
            assert PT.maximin_value(w, b, lam_t) >= best * (1 - 1e-12)
        # small trace-preserving perturbations also do not improve
        for _ in range(50):
            d = rng.standard_normal((4, 4))
            d = 0.5 * (d + d.T)
            d -= np.trace(d) / 4 * np.eye(4)
            assert PT.maximin_value(v + 1e-3 * d / np.linalg.norm(d), b, lam_t) >= best * (1 - 1e-12)


def test_optimal_v_stacked_matches_single():
    rng = np.random.default_rng(1)
    _, lam_t = _lam(4.0)
    bs = np.array([random_spd(rng) for _ in range(3)])
    stacked = PT.optimal_v(bs, lam_t)
    for k in range(3):
        assert np.allclose(stacked[k], PT.optimal_v(bs[k], lam_t), rtol=1e-12)


def test_weights_match_traces(paper_model):
    rng = np.random.default_rng(2)
    lam_t = np.diag(1.0 / paper_model.lam_diag)
    v = np.array([random_spd(rng) for _ in range(paper_model.Q)])
    w = PT.weights(v, paper_model.c_tilde, lam_t)
    for i in range(paper_model.N):
        for q in range(paper_model.Q):
            m = lam_t @ v[q]
            assert w[i, q] == pytest.approx(np.trace(m.T @ paper_model.c_tilde[i, q] @ m), rel=1e-12)


def test_surrogate_equals_objective_at_optimal_v(paper_model, rng):
    # f(z) + prior term evaluated at V*(z) reproduces g(z)
    lam_t = np.diag(1.0 / paper_model.lam_diag)
    for _ in range(5):
        sol = random_allocation(paper_model, rng)
        v = PT.optimal_v(paper_model.bayes_fims(sol.z, sol.blocks), lam_t)
        fp = PT.assemble_fractional(paper_model, PT.weights(v, paper_model.c_tilde, lam_t), sol.blocks)
        f, _ = PT.fractional_value_and_gradient(fp, sol.z)
        prior = sum(PT.maximin_value(v[q], paper_model.gamma_tilde[q], lam_t) for q in range(paper_model.Q))
        assert f + prior == pytest.approx(paper_model.objective(sol.z, sol.blocks), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_fractional_gradient_matches_fd(seed):
    rng = np.random.default_rng(seed)
    sc = generate_random_scenario(seed % 50, (2, 2, 1, 2, 3))
    model = make_model(sc)
    sol = random_allocation(model, rng)
    omega = rng.uniform(0.1, 2.0, size=(model.N, model.Q))
    fp = PT.assemble_fractional(model, omega, sol.blocks)
    _, grad = PT.fractional_value_and_gradient(fp, sol.z)
    fd = central_gradient(lambda x: PT.fractional_value_and_gradient(fp, x)[0], sol.z)
    assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd) + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_constraint_rows_encode_feasibility(seed):
    sc = generate_random_scenario(seed, (2, 2, 1, 2, 4))
    model = make_model(sc)
    rng = np.random.default_rng(seed)
    blocks = model.uniform[1]
    a, b, names = PT.constraint_rows(model, blocks)
    assert len(names) == len(b) == model.n_c + model.n_p + 1 + model.J
    z0 = model.uniform[0]
    for _ in range(200):
        z = z0 * rng.uniform(0.3, 1.7, size=z0.size)
        slack = b - a @ z
        thr = slack[-model.J:]
        margins = model.margins(z, blocks)
        for s, m in zip(thr, margins):
            if abs(m) > 1e-9:
                assert (s >= 0) == (m >= 0)
        budgets = model.budget_slacks(z)
        assert np.allclose(slack[: -model.J], budgets, atol=1e-12)


def test_ascent_improves_and_stays_feasible(paper_model):
    z0, blocks = paper_model.uniform
    res = PT.ascent_descent_solve(paper_model, z0, blocks)
    assert res.objective >= paper_model.objective(z0, blocks)
    assert all(b >= a for a, b in zip(res.trace, res.trace[1:]))
    assert paper_model.is_feasible(res.z, blocks)
    assert res.objective == pytest.approx(paper_model.objective(res.z, blocks))


def test_ascent_beats_random_feasible_points(desk3_model):
    rng = np.random.default_rng(3)
    z0, blocks = desk3_model.uniform
    res = PT.ascent_descent_solve(desk3_model, z0, blocks, PT.AscentParams(tol=1e-8))
    a, b, _ = PT.constraint_rows(desk3_model, blocks)
    best_random = -np.inf
    for _ in range(3000):
        z = rng.uniform(0, 1, size=z0.size) * np.maximum(z0, 1e-3) * 2
        if np.all(a @ z <= b):
            best_random = max(best_random, desk3_model.objective(z, blocks))
    assert res.objective >= best_random * (1 - 1e-6)


def test_fixed_step_variant_also_monotone(paper_model):
    z0, blocks = paper_model.uniform
    res = PT.ascent_descent_solve(paper_model, z0, blocks, PT.AscentParams(growth=1.0, max_iters=50))
    assert all(b >= a for a, b in zip(res.trace, res.trace[1:]))


def test_ascent_params_validation():
    with pytest.raises(ValueError):
        PT.AscentParams(step_size=0.0)


def test_stopped_radars(paper_model):
    z, blocks = paper_model.uniform
    z = z.copy()
    off_t = paper_model.n_c * paper_model.Q
    z[off_t] = 0.0           # first phased array stops looking at target 1
    stopped = PT.stopped_radars(paper_model, z)
    assert (paper_model.scenario.radars[paper_model.n_c].id, 0) in stopped
