"""Information and QoS quantities for one fusion interval.

Everything that the allocators need is precomputed once per interval in
:class:`IntervalModel`: the measurement-information matrices ``C~_{i,q}``
(summed over the interval's measurements and evaluated at the predicted
state), the prior term ``Gamma~_q``, block overlaps and gains. The model then
evaluates the Bayesian FIMs, the objective ``g``, SINRs and margins for any
allocation ``(z, blocks)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import SingularMatrixError
from .kinematics import (measurement_jacobian, process_noise, spd_inverse,
                         transition, transition_matrix)
from .scenario import IntervalSchedule, RadarKind, Scenario


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class AllocationVector:
    """Optimisation variables of one interval.

    ``mimo_powers`` is N_c x Q, ``par_dwells`` is N_p x Q and ``comm_powers``
    has one entry per macro user. ``flatten`` gives the solver ordering
    ``[P_11..P_{Nc,Q}, T_{Nc+1,1}..T_{Nc+Np,Q}, Pc_1..Pc_J]`` (row-major per radar).
    """

    mimo_powers: np.ndarray
    par_dwells: np.ndarray
    comm_powers: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.mimo_powers), np.ravel(self.par_dwells),
                               np.ravel(self.comm_powers)])

    @classmethod
    def from_flat(cls, scenario: Scenario, z: np.ndarray) -> "AllocationVector":
        n_c, n_p, _ = scenario.kind_counts
        q = scenario.num_targets
        z = np.asarray(z, dtype=float)
        if z.shape != (scenario.num_variables,):
            raise ValueError(f"expected {scenario.num_variables} variables, got {z.shape}")
        a, b = n_c * q, (n_c + n_p) * q
        return cls(z[:a].reshape(n_c, q).copy(), z[a:b].reshape(n_p, q).copy(), z[b:].copy())


@dataclass(frozen=True)
class FrequencyAllocation:
    """One comm block per macro user, stored as block indices."""

    blocks: tuple[int, ...]
    num_blocks: int
    block_size: int

    def __post_init__(self) -> None:
        if len(set(self.blocks)) != len(self.blocks):
            raise ValueError("blocks must be disjoint")
        if any(not 0 <= b < self.num_blocks for b in self.blocks):
            raise ValueError("block index out of range")

    @property
    def selectors(self) -> np.ndarray:
        s = np.zeros((len(self.blocks), self.num_blocks))
        s[np.arange(len(self.blocks)), list(self.blocks)] = 1.0
        return s

    @property
    def expanded(self) -> np.ndarray:
        return np.kron(self.selectors, np.ones(self.block_size))

    @classmethod
    def from_blocks(cls, scenario: Scenario, blocks: Sequence[int]) -> "FrequencyAllocation":
        return cls(tuple(int(b) for b in blocks), scenario.num_blocks, scenario.comm_block_size)


@dataclass
class FusionPrior:
    """Per-target state carried between intervals (arrays stacked over targets)."""

    bayes_fim: np.ndarray   # Q x 4 x 4, B(s_{t_k})
    kalman_cov: np.ndarray  # Q x 4 x 4, C_{k|k}
    state: np.ndarray       # Q x 4, filtered state at t_k
    time: float = 0.0

    def copy(self) -> "FusionPrior":
        return FusionPrior(self.bayes_fim.copy(), self.kalman_cov.copy(), self.state.copy(), self.time)


def initial_prior(scenario: Scenario, states: np.ndarray, cov_scale: float = 10.0,
                  time: float = 0.0) -> FusionPrior:
    """Prior with C_{1|1} = ``cov_scale`` x the one-interval process-noise covariance."""
    covs = np.array([cov_scale * process_noise(scenario.fusion_period, t.process_noise_intensity)
                     for t in scenario.targets])
    fims = np.array([spd_inverse(c) for c in covs])
    return FusionPrior(fims, covs, np.array(states, dtype=float), time)


# ---------------------------------------------------------------------------
# elementary formulas


def measurement_covariance(shape_diag: np.ndarray, noise_power: float, power: float,
                           dwell: float, comm_interference: float = 0.0) -> np.ndarray:
    """Sigma = (interference + sigma_r^2) / (P T) * C for a diagonal shape matrix C."""
    pt = power * dwell
    if not pt > 0:
        raise ZeroDivisionError("P*T = 0 gives infinite measurement variance")
    return np.diag((comm_interference + noise_power) / pt * np.asarray(shape_diag, float))


def normalized_crb_trace(b: np.ndarray, normalizer: np.ndarray) -> np.ndarray:
    """Tr(Lambda B^-1 Lambda) for a stack of SPD matrices (... x 4 x 4)."""
    b = np.asarray(b, dtype=float)
    lam = np.diag(normalizer)
    # scale so the Cholesky test is insensitive to units
    bs = b / np.outer(lam, lam) if b.ndim == 2 else b / np.outer(lam, lam)[None]
    d = np.sqrt(np.einsum("...ii->...i", bs))
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise SingularMatrixError("Bayesian FIM has a non-positive diagonal")
    bn = bs / (d[..., :, None] * d[..., None, :])
    try:
        chol = np.linalg.cholesky(bn)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("Bayesian FIM is not positive definite") from exc
    if np.min(np.einsum("...ii->...i", chol)) ** 2 < 1e-14:
        raise SingularMatrixError("Bayesian FIM is numerically singular")
    eye = np.broadcast_to(np.eye(4), bn.shape)
    linv = np.linalg.solve(chol, eye)
    # Lambda B^-1 Lambda = D^-1 Bn^-1 D^-1 with D = diag(d)
    return np.sum((linv / d[..., None, :]) ** 2, axis=(-2, -1))


def objective_from_fims(b: np.ndarray, normalizer: np.ndarray) -> float:
    """g = sum_q 1 / Tr(Lambda B_q^-1 Lambda)."""
    return math.fsum(1.0 / normalized_crb_trace(b, normalizer))


def throughput(sinr: np.ndarray) -> np.ndarray:
    return np.log1p(sinr)


# ---------------------------------------------------------------------------
# interval model


def predicted_states(prior: FusionPrior, dt: float) -> np.ndarray:
    return transition(prior.state, dt)


def prior_information(scenario: Scenario, prior: FusionPrior) -> np.ndarray:
    """Gamma~_q = [Gamma_q + F B_prev^-1 F^T]^-1, stacked over targets."""
    t0 = scenario.fusion_period
    f = transition_matrix(t0)
    out = []
    for q, tgt in enumerate(scenario.targets):
        gam = process_noise(t0, tgt.process_noise_intensity)
        out.append(spd_inverse(gam + f @ spd_inverse(prior.bayes_fim[q]) @ f.T))
    return np.array(out)


def information_per_unit(scenario: Scenario, schedule: IntervalSchedule,
                         states: np.ndarray) -> np.ndarray:
    """C~_{i,q} = sum_m H^T C^-1 H at the given fusion-time states (N x Q x 4 x 4)."""
    shape = scenario.measurement_shape()
    n, q = scenario.num_radars, scenario.num_targets
    out = np.zeros((n, q, 4, 4))
    for i, radar in enumerate(scenario.radars):
        for k in range(q):
            w = 1.0 / shape[i, k]
            for t in schedule.times[i][k]:
                h = measurement_jacobian(states[k], radar.position, schedule.end - t)
                out[i, k] += (h.T * w) @ h
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def uniform_point(scenario: Scenario, counts: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Uniform split of every budget and first-fit blocks ``j -> j``.

    Radar budgets are divided as ``P_total / sum_q M_{i,q}`` so each budget row
    is tight; targets a radar does not observe in this interval get zero.
    """
    n_c, n_p, _ = scenario.kind_counts
    parts = []
    for i, r in enumerate(scenario.radars[: n_c + n_p]):
        budget = r.power_budget if r.kind is RadarKind.MIMO else r.time_budget
        m = counts[i]
        total = m.sum()
        parts.append(np.where(m > 0, budget / total, 0.0) if total > 0 else np.zeros_like(m))
    j = scenario.num_macro
    pc = np.full(j, scenario.comm_power_budget / j) if j else np.zeros(0)
    z = np.concatenate(parts + [pc]) if parts else pc
    return z, tuple(range(j))


class IntervalModel:
    """Closed-form objective and constraint evaluation for one fusion interval.

    Parameters
    ----------
    scenario, schedule, prior
        The world, the interval's measurement times and the prior carried in.
    thresholds
        Macro throughput requirements in nats. ``None`` uses the scenario's
        values and, where those are unset, calibrates to the uniform allocation.
    """

    def __init__(self, scenario: Scenario, schedule: IntervalSchedule, prior: FusionPrior,
                 thresholds: np.ndarray | None = None):
        self.scenario = sc = scenario
        self.schedule = schedule
        self.prior = prior
        self.t0 = sc.fusion_period
        self.normalizer = sc.normalizer
        self.lam_diag = np.diag(self.normalizer)
        self.n_c, self.n_p, self.n_m = sc.kind_counts
        self.N, self.Q, self.J = sc.num_radars, sc.num_targets, sc.num_macro
        self.num_blocks = sc.num_blocks
        self.counts = schedule.counts
        self.pred_states = predicted_states(prior, self.t0)
        self.c_tilde = information_per_unit(sc, schedule, self.pred_states)
        self.gamma_tilde = prior_information(sc, prior)
        self.noise_r = sc.radar_noise
        self.overlap = sc.block_overlap
        self.alpha_c = sc.user_to_radar          # N x J
        self.alpha_r = sc.radar_to_user          # J x N
        macro = sc.macro_users
        self.beta = np.array([u.channel_gain for u in macro])
        self.noise_c = np.array([u.noise_power for u in macro])
        self.fixed_p = np.nan_to_num(sc.fixed_power)
        self.fixed_t = np.nan_to_num(sc.fixed_dwell)
        self.budgets = np.array([r.power_budget if r.kind is RadarKind.MIMO else r.time_budget
                                 for r in sc.radars[: self.n_c + self.n_p]], dtype=float)
        if thresholds is None:
            thresholds = np.array([np.nan if u.throughput_threshold is None
                                   else u.throughput_threshold for u in macro])
            if np.any(np.isnan(thresholds)):
                z_u, b_u = uniform_point(sc, self.counts)
                calib = self.throughputs(z_u, b_u)
                thresholds = np.where(np.isnan(thresholds), calib, thresholds)
        self.thresholds = np.asarray(thresholds, dtype=float).reshape(self.J)

    # -- variables -----------------------------------------------------
    def power_dwell(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-radar, per-target P and T (N x Q) plus the comm powers."""
        z = np.asarray(z, dtype=float)
        q = self.Q
        a, b = self.n_c * q, (self.n_c + self.n_p) * q
        p = np.repeat(self.fixed_p[:, None], q, axis=1)
        t = np.repeat(self.fixed_t[:, None], q, axis=1)
        p[: self.n_c] = z[:a].reshape(self.n_c, q)
        t[self.n_c: self.n_c + self.n_p] = z[a:b].reshape(self.n_p, q)
        return p, t, z[b:]

    def overlap_matrix(self, blocks: Sequence[int]) -> np.ndarray:
        """N x J subchannel overlap (f_i^r)^T f_j^c for the given blocks."""
        if self.J == 0:
            return np.zeros((self.N, 0))
        return self.overlap[:, list(blocks)]

    def radar_interference(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        """sum_j alpha~^c_{ij} (f_i^r)^T f_j^c P_c^j for every radar."""
        _, _, pc = self.power_dwell(z)
        return (self.alpha_c * self.overlap_matrix(blocks)) @ pc

    def prefactor(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        p, t, _ = self.power_dwell(z)
        return p * t / (self.radar_interference(z, blocks) + self.noise_r)[:, None]

    # -- information -----------------------------------------------------
    def bayes_fims(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        pref = self.prefactor(z, blocks)
        b = np.einsum("iq,iqab->qab", pref, self.c_tilde) + self.gamma_tilde
        return 0.5 * (b + np.swapaxes(b, -1, -2))

    def objective(self, z: np.ndarray, blocks: Sequence[int]) -> float:
        return objective_from_fims(self.bayes_fims(z, blocks), self.normalizer)

    def data_fims(self, z: np.ndarray, blocks: Sequence[int],
                  states: np.ndarray | None = None) -> np.ndarray:
        """Composite-measure FIMs (no prior term), optionally at other states."""
        ct = self.c_tilde if states is None else information_per_unit(
            self.scenario, self.schedule, states)
        return np.einsum("iq,iqab->qab", self.prefactor(z, blocks), ct)

    # -- communications --------------------------------------------------
    def radar_activity(self, z: np.ndarray) -> np.ndarray:
        """sum_q M_{i,q} P_{i,q} T_{i,q} per radar."""
        p, t, _ = self.power_dwell(z)
        return np.sum(self.counts * p * t, axis=1)

    def user_interference(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        ov = self.overlap_matrix(blocks)          # N x J
        return np.einsum("ji,ij,i->j", self.alpha_r, ov, self.radar_activity(z))

    def sinrs(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        _, _, pc = self.power_dwell(z)
        den = self.user_interference(z, blocks) + self.noise_c * self.t0
        return self.beta * pc * self.t0 / den

    def throughputs(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        return throughput(self.sinrs(z, blocks))

    def margins(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        return self.throughputs(z, blocks) - self.thresholds

    def micro_sinrs(self, z: np.ndarray, blocks: Sequence[int]) -> np.ndarray:
        """Micro users share the partner's block; reported only."""
        sc = self.scenario
        macro_ids = [u.id for u in sc.macro_users]
        _, _, pc = self.power_dwell(z)
        act = self.radar_activity(z)
        out = []
        for u in sc.micro_users:
            j = macro_ids.index(u.partner)
            ov = self.overlap[:, blocks[j]]
            radar_term = float(np.sum(np.asarray(u.radar_to_user_gains) * ov * act))
            den = radar_term + u.cross_tier_gain * pc[j] * self.t0 + u.noise_power * self.t0
            out.append(u.channel_gain * u.power * self.t0 / den)
        return np.array(out)

    # -- constraints -----------------------------------------------------
    def budget_slacks(self, z: np.ndarray) -> np.ndarray:
        """Radar budget rows then the comm power row; >= 0 when feasible."""
        p, t, pc = self.power_dwell(z)
        used = np.concatenate([
            np.sum(self.counts[: self.n_c] * p[: self.n_c], axis=1),
            np.sum(self.counts[self.n_c: self.n_c + self.n_p] * t[self.n_c: self.n_c + self.n_p], axis=1),
        ])
        return np.concatenate([self.budgets - used, [self.scenario.comm_power_budget - pc.sum()]])

    def is_feasible(self, z: np.ndarray, blocks: Sequence[int], tol: float = 1e-9) -> bool:
        z = np.asarray(z)
        if np.any(z < -tol) or len(set(blocks)) != len(blocks):
            return False
        if np.any(self.budget_slacks(z) < -tol):
            return False
        return bool(np.all(self.margins(z, blocks) >= -tol))

    @cached_property
    def uniform(self) -> tuple[np.ndarray, tuple[int, ...]]:
        return uniform_point(self.scenario, self.counts)
