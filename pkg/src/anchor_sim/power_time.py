"""Power and dwell allocation at fixed frequency blocks.

The subproblem is solved as a maximin problem: for fixed ``z`` the inner
minimisation over trace-one matrices ``V_q`` has a closed form, and for fixed
``V_q`` the objective becomes a sum of linear-fractional terms

    f(z) = sum_i (c_i^T z + d_i) / (e_i^T z + sigma_i^2)

which is climbed with one projected gradient step before ``V`` is refreshed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, SingularMatrixError
from .fim import IntervalModel
from .kinematics import spd_inverse
from .projection import project_onto_polytope

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AscentParams:
    step_size: float | None = None   # None -> 0.1 * min budget / ||grad f(z0)||
    max_iters: int = 500
    tol: float = 1e-4                # relative increase of g
    max_halvings: int = 20
    growth: float = 2.0              # step multiplier after an accepted step (1 = fixed)
    qp_tol: float = 1e-12

    def __post_init__(self) -> None:
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")


@dataclass
class FractionalProgram:
    c: np.ndarray        # N x n_var
    d: np.ndarray        # N
    e: np.ndarray        # N x n_var
    sigma2: np.ndarray   # N
    a: np.ndarray        # rows x n_var
    b: np.ndarray        # rows
    row_names: list[str] = field(default_factory=list)


def optimal_v(b: np.ndarray, lam_tilde: np.ndarray) -> np.ndarray:
    """V* = (L~ B L~)^-1 / Tr[(L~ B L~)^-1]; works on a single matrix or a stack."""
    x = lam_tilde @ b @ lam_tilde
    if x.ndim == 2:
        xi = spd_inverse(x)
        return xi / np.trace(xi)
    xi = np.array([spd_inverse(m) for m in x])
    return xi / np.einsum("qii->q", xi)[:, None, None]


def maximin_value(v: np.ndarray, b: np.ndarray, lam_tilde: np.ndarray) -> float:
    """Tr(V^T L~ B L~ V)."""
    return float(np.trace(v.T @ lam_tilde @ b @ lam_tilde @ v))


def weights(v: np.ndarray, c_tilde: np.ndarray, lam_tilde: np.ndarray) -> np.ndarray:
    """omega_{i,q} = Tr[(L~ V_q)^T C~_{i,q} (L~ V_q)] for V stacked Q x 4 x 4."""
    lv = lam_tilde @ v                                  # Q x 4 x 4
    return np.einsum("qka,iqkl,qla->iq", lv, c_tilde, lv)


def constraint_rows(model: IntervalModel, blocks: Sequence[int]) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """A, b of the polytope (budgets, comm budget, throughput rows)."""
    sc = model.scenario
    n_c, n_p, Q, J = model.n_c, model.n_p, model.Q, model.J
    nv = sc.num_variables
    off_t, off_c = n_c * Q, (n_c + n_p) * Q
    rows, rhs, names = [], [], []
    for i in range(n_c):
        r = np.zeros(nv)
        r[i * Q:(i + 1) * Q] = model.counts[i]
        rows.append(r), rhs.append(model.budgets[i]), names.append(f"power_budget[radar {sc.radars[i].id}]")
    for k in range(n_p):
        i = n_c + k
        r = np.zeros(nv)
        r[off_t + k * Q: off_t + (k + 1) * Q] = model.counts[i]
        rows.append(r), rhs.append(model.budgets[i]), names.append(f"time_budget[radar {sc.radars[i].id}]")
    r = np.zeros(nv)
    r[off_c:] = 1.0
    rows.append(r), rhs.append(sc.comm_power_budget), names.append("comm_power_budget")

    ov = model.overlap_matrix(blocks)              # N x J
    gamma = np.expm1(model.thresholds)
    for j in range(J):
        coef = model.alpha_r[j] * ov[:, j]         # per radar
        r = np.zeros(nv)
        for i in range(n_c):
            r[i * Q:(i + 1) * Q] = coef[i] * model.counts[i] * model.fixed_t[i]
        for k in range(n_p):
            i = n_c + k
            r[off_t + k * Q: off_t + (k + 1) * Q] = coef[i] * model.counts[i] * model.fixed_p[i]
        fixed = sum(coef[i] * np.sum(model.counts[i]) * model.fixed_p[i] * model.fixed_t[i]
                    for i in range(n_c + n_p, model.N))
        if gamma[j] > 0:
            r[off_c + j] = model.beta[j] * model.t0 / (-gamma[j])
            bj = -model.noise_c[j] * model.t0 - fixed
        else:
            # zero threshold: the row is vacuous
            r[:] = 0.0
            r[off_c + j] = -1.0
            bj = 0.0
        rows.append(r), rhs.append(bj), names.append(f"throughput[user {sc.macro_users[j].id}]")
    return np.array(rows).reshape(-1, nv), np.array(rhs, dtype=float), names


def assemble_fractional(model: IntervalModel, omega: np.ndarray, blocks: Sequence[int],
                        rows: tuple[np.ndarray, np.ndarray, list[str]] | None = None) -> FractionalProgram:
    """Linear-fractional surrogate at weights ``omega`` (N x Q)."""
    n_c, n_p, Q = model.n_c, model.n_p, model.Q
    nv = model.scenario.num_variables
    off_t, off_c = n_c * Q, (n_c + n_p) * Q
    c = np.zeros((model.N, nv))
    d = np.zeros(model.N)
    for i in range(n_c):
        c[i, i * Q:(i + 1) * Q] = omega[i] * model.fixed_t[i]
    for k in range(n_p):
        i = n_c + k
        c[i, off_t + k * Q: off_t + (k + 1) * Q] = omega[i] * model.fixed_p[i]
    for i in range(n_c + n_p, model.N):
        d[i] = np.sum(omega[i]) * model.fixed_p[i] * model.fixed_t[i]
    e = np.zeros((model.N, nv))
    e[:, off_c:] = model.alpha_c * model.overlap_matrix(blocks)
    a, b, names = rows if rows is not None else constraint_rows(model, blocks)
    return FractionalProgram(c, d, e, model.noise_r.copy(), a, b, names)


def fractional_value_and_gradient(fp: FractionalProgram, z: np.ndarray) -> tuple[float, np.ndarray]:
    num = fp.c @ z + fp.d
    den = fp.e @ z + fp.sigma2
    if np.any(den <= 0):
        raise ZeroDivisionError("non-positive denominator in fractional objective")
    value = math.fsum(num / den)
    grad = ((den[:, None] * fp.c - num[:, None] * fp.e) / (den**2)[:, None]).sum(axis=0)
    return value, grad


@dataclass
class AscentResult:
    z: np.ndarray
    objective: float
    trace: list[float]
    iterations: int
    step_size: float


def ascent_descent_solve(model: IntervalModel, z0: np.ndarray, blocks: Sequence[int],
                         params: AscentParams = AscentParams()) -> AscentResult:
    """Alternate the closed-form V update with projected gradient steps on z.

    A step that would lower g is retried with half the step size (up to
    ``max_halvings`` times); if none succeeds the solver stops. After an
    accepted step the step size is multiplied by ``growth``.
    """
    lam_tilde = np.diag(1.0 / model.lam_diag)
    rows = constraint_rows(model, blocks)
    z = np.asarray(z0, dtype=float).copy()
    g = model.objective(z, blocks)
    trace = [g]
    eta = params.step_size
    iters = 0
    for _ in range(params.max_iters):
        bq = model.bayes_fims(z, blocks)
        v = optimal_v(bq, lam_tilde)
        fp = assemble_fractional(model, weights(v, model.c_tilde, lam_tilde), blocks, rows)
        _, grad = fractional_value_and_gradient(fp, z)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0 or not np.isfinite(gnorm):
            break
        if eta is None:
            min_budget = min(list(model.budgets) + [model.scenario.comm_power_budget])
            eta = 0.1 * min_budget / gnorm
        step_ok = False
        for _ in range(params.max_halvings + 1):
            z_new = project_onto_polytope(z + eta * grad, rows[0], rows[1],
                                          tol=params.qp_tol, names=rows[2]).z
            z_new = np.maximum(z_new, 0.0)
            try:
                g_new = model.objective(z_new, blocks)
            except SingularMatrixError:
                g_new = -math.inf
            if g_new >= g:
                step_ok = True
                break
            eta *= 0.5
        if not step_ok:
            break
        gain = g_new - g
        z, g = z_new, g_new
        trace.append(g)
        if gain > 0:
            iters += 1
        if gain < params.tol * abs(g):
            break
        eta *= params.growth
    if not np.isfinite(g):
        raise ConvergenceError("objective became non-finite")
    return AscentResult(z, g, trace, iters, eta or 0.0)


def stopped_radars(model: IntervalModel, z: np.ndarray, rel: float = 1e-6) -> list[tuple[int, int]]:
    """(radar id, target index) pairs whose dwell is numerically zero."""
    _, t, _ = model.power_dwell(z)
    out = []
    for k in range(model.n_p):
        i = model.n_c + k
        for q in range(model.Q):
            if model.counts[i, q] > 0 and t[i, q] < rel * model.budgets[i]:
                out.append((model.scenario.radars[i].id, q))
    return out
