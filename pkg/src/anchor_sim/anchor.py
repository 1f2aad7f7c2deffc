"""Alternating frequency / power-time allocation and the baseline allocators."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleError
from .fim import IntervalModel
from .freq_alloc import (AnnealParams, anneal, build_assignment_problem,
                         greedy_first_fit)
from .power_time import AscentParams, ascent_descent_solve

log = logging.getLogger(__name__)

MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class AnchorParams:
    outer_tol: float = 1e-4      # relative increase of g
    max_outer_iters: int = 100
    anneal: AnnealParams = AnnealParams()
    ascent: AscentParams = AscentParams()

    def __post_init__(self) -> None:
        if not (self.outer_tol > 0 and self.max_outer_iters > 0):
            raise ValueError("outer_tol and max_outer_iters must be positive")


@dataclass
class AllocationSolution:
    z: np.ndarray
    blocks: tuple[int, ...]
    objective: float
    objective_trace: list[float] = field(default_factory=list)
    freq_traces: list[list[float]] = field(default_factory=list)
    ascent_traces: list[list[float]] = field(default_factory=list)
    margins: np.ndarray | None = None
    budget_slacks: np.ndarray | None = None
    method: str = ""

    def check_monotone(self, slack: float = 1e-9) -> bool:
        t = self.objective_trace
        return all(b >= a - slack * max(1.0, abs(a)) for a, b in zip(t, t[1:]))


def _finish(model: IntervalModel, z: np.ndarray, blocks, method: str, **kw) -> AllocationSolution:
    return AllocationSolution(
        z=z, blocks=tuple(blocks), objective=model.objective(z, blocks),
        margins=model.margins(z, blocks), budget_slacks=model.budget_slacks(z),
        method=method, **kw)


def uniform_allocation(model: IntervalModel) -> AllocationSolution:
    z, blocks = model.uniform
    g = model.objective(z, blocks)
    return _finish(model, z.copy(), blocks, "uniform", objective_trace=[g])


def random_allocation(model: IntervalModel, rng: np.random.Generator,
                      max_rejections: int = MAX_REJECTIONS) -> AllocationSolution:
    """Random feasible allocation: Dirichlet budget splits, random disjoint
    blocks, comm powers at their minimum plus a Dirichlet share of what is left."""
    n_c, n_p, Q, J = model.n_c, model.n_p, model.Q, model.J
    gamma = np.expm1(model.thresholds)
    culprit = "throughput"
    for _ in range(max_rejections):
        parts = []
        for i in range(n_c + n_p):
            m = model.counts[i]
            obs = m > 0
            x = np.zeros(Q)
            if obs.any():
                w = rng.dirichlet(np.ones(int(obs.sum())))
                x[obs] = model.budgets[i] * w / m[obs]
            parts.append(x)
        blocks = tuple(int(b) for b in rng.permutation(model.num_blocks)[:J])
        z = np.concatenate(parts + [np.zeros(J)])
        # interference each user would see does not depend on comm powers
        need = gamma * (model.user_interference(z, blocks) + model.noise_c * model.t0) / (model.beta * model.t0)
        budget = model.scenario.comm_power_budget
        if J and (not np.all(np.isfinite(need)) or need.sum() > budget):
            culprit = "comm_power_budget"
            continue
        if J:
            z[-J:] = need + (budget - need.sum()) * rng.dirichlet(np.ones(J))
        if model.is_feasible(z, blocks):
            return _finish(model, z, blocks, "random")
    raise InfeasibleError(culprit, f"random allocation found no feasible draw in {max_rejections} attempts")


def anchor_solve(model: IntervalModel, params: AnchorParams = AnchorParams(),
                 rng: np.random.Generator | None = None,
                 init: AllocationSolution | None = None) -> AllocationSolution:
    """Alternate annealed block assignment and ascent-descent power/dwell updates
    until the relative increase of g drops below ``outer_tol``."""
    rng = np.random.default_rng(0) if rng is None else rng
    start = uniform_allocation(model) if init is None else init
    z, blocks = start.z.copy(), tuple(start.blocks)
    if not model.is_feasible(z, blocks):
        bad = np.flatnonzero(model.margins(z, blocks) < -1e-9)
        if bad.size:
            uid = model.scenario.macro_users[int(bad[0])].id
            raise InfeasibleError(f"throughput[user {uid}]", "initial allocation is infeasible",
                                  user=uid)
        raise InfeasibleError("budget", "initial allocation is infeasible")
    g = model.objective(z, blocks)
    sol = AllocationSolution(z, blocks, g, objective_trace=[g], method="anchor")
    for _ in range(params.max_outer_iters):
        if model.J:
            prob = build_assignment_problem(model, z)
            init_blocks = blocks if prob.is_feasible(blocks) else greedy_first_fit(prob.masks)
            ap = replace(params.anneal, early_exit_objective=g + params.outer_tol * abs(g))
            res = anneal(prob, init_blocks, ap, rng)
            sol.freq_traces.append(res.trace)
            if res.objective > g:
                blocks = res.blocks
        asc = ascent_descent_solve(model, z, blocks, params.ascent)
        sol.ascent_traces.append(asc.trace)
        z = asc.z
        g_new = model.objective(z, blocks)
        if g_new < g - 1e-9 * max(1.0, abs(g)):
            raise AssertionError(f"objective decreased from {g!r} to {g_new!r}")
        sol.objective_trace.append(g_new)
        gain = g_new - g
        g = g_new
        if gain < params.outer_tol * abs(g):
            break
    out = _finish(model, z, blocks, "anchor", objective_trace=sol.objective_trace,
                  freq_traces=sol.freq_traces, ascent_traces=sol.ascent_traces)
    return out
