"""One-block-per-user frequency assignment by constrained simulated annealing.

Power and dwell are held fixed. Each macro user gets one comm block; blocks
are disjoint and a user may only sit on a block where the radar interference
it would receive keeps it above its throughput threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, InstanceTooLarge, TransitionFailure
from .fim import IntervalModel

MAX_EXHAUSTIVE = 10**6


@dataclass(frozen=True)
class AnnealParams:
    t_max: float = 1000.0
    t_min: float = 0.1
    delta_t: float = 1.0
    early_exit_objective: float | None = None
    transition_retries: int = 100

    def __post_init__(self) -> None:
        if not (self.t_max > self.t_min > 0 and self.delta_t > 0):
            raise ValueError("need t_max > t_min > 0 and delta_t > 0")

    @property
    def num_steps(self) -> int:
        return int(math.floor((self.t_max - self.t_min) / self.delta_t + 1e-9)) + 1


@dataclass
class AssignmentProblem:
    """Frequency subproblem at a fixed ``z``.

    ``a_tilde[j, n]`` is the radar interference user ``j`` would see on block
    ``n``; ``eps_tilde[j]`` is the most it can tolerate. ``b_tilde[i, q, j, n]``
    is the interference-to-signal contribution of user ``j`` on block ``n`` to
    radar ``i``'s measurements of target ``q``.
    """

    eps_tilde: np.ndarray
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    sigma_tilde: np.ndarray
    masks: np.ndarray
    model: IntervalModel
    z: np.ndarray
    _w: np.ndarray = field(repr=False, default=None)
    _pt: np.ndarray = field(repr=False, default=None)
    _cs: np.ndarray = field(repr=False, default=None)
    _gs: np.ndarray = field(repr=False, default=None)
    _users: np.ndarray = field(repr=False, default=None)
    _noise: np.ndarray = field(repr=False, default=None)

    def __post_init__(self) -> None:
        self._users = np.arange(self.a_tilde.shape[0])
        self._noise = self.model.noise_r
        self.candidates = [np.flatnonzero(m).tolist() for m in self.masks]

    @property
    def num_users(self) -> int:
        return self.a_tilde.shape[0]

    @property
    def num_blocks(self) -> int:
        return self.a_tilde.shape[1]

    def is_feasible(self, blocks: Sequence[int]) -> bool:
        return (len(set(blocks)) == len(blocks)
                and all(self.masks[j, b] for j, b in enumerate(blocks)))

    def objective(self, blocks: Sequence[int]) -> float:
        """g at (z, blocks); -inf if a Bayesian FIM is not invertible."""
        if len(blocks):
            interf = self._w[:, self._users, blocks].sum(axis=1)
        else:
            interf = 0.0
        pref = self._pt / (interf + self._noise)[:, None]
        bs = (np.matmul(pref.T[:, None, :], self._cs)[:, 0, :] + self._gs).reshape(-1, 4, 4)
        try:
            inv = np.linalg.inv(bs)
        except np.linalg.LinAlgError:
            return -math.inf
        tr = inv.trace(axis1=1, axis2=2)
        value = float((1.0 / tr).sum())
        if not (tr.min() > 0 and math.isfinite(value)):
            return -math.inf
        return value


def build_assignment_problem(model: IntervalModel, z: np.ndarray) -> AssignmentProblem:
    z = np.asarray(z, dtype=float)
    p, t, pc = model.power_dwell(z)
    pt = p * t
    ov = model.overlap                                   # N x N_f
    a_tilde = model.alpha_r[:, :, None] * (model.radar_activity(z)[:, None] * ov)[None]
    a_tilde = a_tilde.sum(axis=1)                        # J x N_f
    gamma = np.expm1(model.thresholds)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps_tilde = np.where(gamma > 0,
                             (model.beta * pc - model.noise_c * gamma) * model.t0 / gamma,
                             np.inf)
    # w[i, j, n] = alpha~^c_ij Pc_j overlap(i, n)
    w = model.alpha_c[:, :, None] * pc[None, :, None] * ov[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        b_tilde = np.where(pt[:, :, None, None] > 0, w[:, None] / pt[:, :, None, None], np.inf)
        sigma_tilde = np.where(pt > 0, model.noise_r[:, None] / np.where(pt > 0, pt, 1.0), np.inf)
    tol = 1e-9 * (np.abs(np.where(np.isfinite(eps_tilde), eps_tilde, 0.0)) + model.noise_c * model.t0)
    masks = a_tilde <= (eps_tilde + tol)[:, None]
    for j in range(model.J):
        if not masks[j].any():
            uid = model.scenario.macro_users[j].id
            raise InfeasibleError(f"throughput[user {uid}]",
                                  "no comm block keeps this user above its threshold", user=uid)
    lam_inv = 1.0 / model.lam_diag
    scale = np.outer(lam_inv, lam_inv)
    return AssignmentProblem(
        eps_tilde=eps_tilde, a_tilde=a_tilde, b_tilde=b_tilde, sigma_tilde=sigma_tilde,
        masks=masks, model=model, z=z, _w=w, _pt=pt,
        _cs=np.ascontiguousarray((model.c_tilde * scale).transpose(1, 0, 2, 3)).reshape(model.Q, model.N, 16),
        _gs=(model.gamma_tilde * scale).reshape(model.Q, 16),
    )


def feasibility_mask(problem: AssignmentProblem) -> np.ndarray:
    return problem.masks.copy()


def transition_state(current: Sequence[int], masks: np.ndarray,
                     rng: np.random.Generator,
                     candidates: list[list[int]] | None = None) -> tuple[int, ...]:
    """Move one random user to an allowed block; a user it lands on is displaced
    and re-draws in turn.

    Each user keeps its own candidate set for the whole move, so every step of
    the chain removes a candidate and the move terminates.
    """
    blocks = list(current)
    n_users = len(blocks)
    if n_users == 0:
        return ()
    cands: dict[int, list[int]] = {}
    j = int(rng.integers(n_users))
    while True:
        if j not in cands:
            cands[j] = (list(candidates[j]) if candidates is not None
                        else np.flatnonzero(masks[j]).tolist())
        pool = cands[j]
        if not pool:
            raise TransitionFailure("candidate positions exhausted")
        n = pool.pop(int(rng.integers(len(pool))))
        blocks[j] = n
        clash = -1
        for k in range(n_users):
            if k != j and blocks[k] == n:
                clash = k
                break
        if clash < 0:
            return tuple(blocks)
        # the displaced user re-draws next
        j = clash


def greedy_first_fit(masks: np.ndarray) -> tuple[int, ...]:
    """Lowest-index disjoint assignment respecting masks (depth-first)."""
    n_users = masks.shape[0]
    chosen: list[int] = []

    def dfs(j: int) -> bool:
        if j == n_users:
            return True
        for n in np.flatnonzero(masks[j]):
            if n not in chosen:
                chosen.append(int(n))
                if dfs(j + 1):
                    return True
                chosen.pop()
        return False

    if not dfs(0):
        raise InfeasibleError("frequency", "no disjoint block assignment satisfies every mask")
    return tuple(chosen)


@dataclass
class AnnealResult:
    blocks: tuple[int, ...]
    objective: float
    trace: list[float]
    accepted: int
    skipped: int


def anneal(problem: AssignmentProblem, init: Sequence[int], params: AnnealParams,
           rng: np.random.Generator) -> AnnealResult:
    """Metropolis search over assignments, returning the best state visited."""
    cur = tuple(int(b) for b in init)
    if not problem.is_feasible(cur):
        raise InfeasibleError("frequency", "initial assignment violates a mask")
    obj_cur = problem.objective(cur)
    best, obj_best = cur, obj_cur
    trace = [obj_best]
    accepted = skipped = 0
    if problem.num_users == 0:
        return AnnealResult(best, obj_best, trace, 0, 0)
    for step in range(params.num_steps):
        temp = params.t_max - step * params.delta_t
        cand = None
        for _ in range(params.transition_retries):
            try:
                cand = transition_state(cur, problem.masks, rng, problem.candidates)
                break
            except TransitionFailure:
                continue
        if cand is None:
            skipped += 1
            trace.append(obj_best)
            continue
        obj_cand = problem.objective(cand)
        delta = obj_cand - obj_cur
        if delta > 0 or math.exp(delta / temp) > rng.random():
            cur, obj_cur = cand, obj_cand
            accepted += 1
            if obj_cur > obj_best:
                best, obj_best = cur, obj_cur
        trace.append(obj_best)
        if params.early_exit_objective is not None and obj_best > params.early_exit_objective:
            break
    return AnnealResult(best, obj_best, trace, accepted, skipped)


def exhaustive_assignment(problem: AssignmentProblem) -> tuple[tuple[int, ...], float, int]:
    """Global maximiser over all masked disjoint assignments.

    Returns ``(blocks, objective, number_evaluated)``.
    """
    n_users, n_blocks = problem.num_users, problem.num_blocks
    if math.perm(n_blocks, n_users) > MAX_EXHAUSTIVE:
        raise InstanceTooLarge(f"{math.perm(n_blocks, n_users)} assignments exceed {MAX_EXHAUSTIVE}")
    best, obj_best, evaluated = None, -math.inf, 0
    for perm in itertools.permutations(range(n_blocks), n_users):
        if not all(problem.masks[j, b] for j, b in enumerate(perm)):
            continue
        evaluated += 1
        obj = problem.objective(perm)
        if obj > obj_best:
            best, obj_best = perm, obj
    if best is None:
        raise InfeasibleError("frequency", "no disjoint block assignment satisfies every mask")
    return tuple(best), obj_best, evaluated
