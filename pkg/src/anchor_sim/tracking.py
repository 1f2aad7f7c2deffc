"""Closed-loop tracking: allocate, measure, fuse, filter, repeat.

Every random draw is keyed by ``(seed, trial, stream, ...)`` through
``numpy.random.SeedSequence`` so that methods see the same noise and results do
not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .anchor import (AllocationSolution, AnchorParams, anchor_solve,
                     random_allocation, uniform_allocation)
from .errors import ConvergenceError, SingularMatrixError
from .fim import FusionPrior, IntervalModel, initial_prior
from .kinematics import (MeasurementRecord, composite_measure_ils, measure,
                         process_noise, spd_inverse, transition,
                         transition_matrix)
from .scenario import Scenario, interval_schedule

log = logging.getLogger(__name__)

METHODS = ("anchor", "uniform", "random")
STREAMS = {"init": 0, "noise": 1, "anneal": 2, "random": 3}


def stream(seed: int, trial: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, STREAMS[name], *extra]))


# ---------------------------------------------------------------------------
# filtering


def kalman_update(state: np.ndarray, cov: np.ndarray, cm: np.ndarray, cm_cov: np.ndarray,
                  t0: float, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One predict/update cycle with the composite measure as observation.

    Returns ``(posterior_state, posterior_cov, predicted_state, predicted_cov)``.
    """
    f = transition_matrix(t0)
    s_pred = f @ state
    c_pred = gamma + f @ cov @ f.T
    innov = c_pred + cm_cov
    innov = 0.5 * (innov + innov.T)
    try:
        chol = np.linalg.cholesky(innov)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("innovation covariance is not positive definite") from exc
    # K = C_pred S^-1
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, c_pred.T)).T
    s_post = s_pred + gain @ (cm - s_pred)
    c_post = (np.eye(4) - gain) @ c_pred
    return s_post, 0.5 * (c_post + c_post.T), s_pred, c_pred


def crmse(estimates: np.ndarray, truth: np.ndarray, normalizer: np.ndarray) -> float:
    """sum_q sqrt(mean_n ||Lambda (s~ - s)||^2).

    ``estimates`` is trials x Q x 4 (or trials x 4 for a single target) and
    ``truth`` is Q x 4 (or 4).
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.ndim == 2:
        est, tru = est[:, None, :], tru[None, :]
    err = (est - tru[None]) * np.diag(normalizer)
    sq = np.sum(err * err, axis=2)                       # trials x Q
    return math.fsum(math.sqrt(math.fsum(sq[:, q]) / sq.shape[0]) for q in range(sq.shape[1]))


# ---------------------------------------------------------------------------
# one interval


@dataclass
class IntervalResult:
    index: int
    method: str
    truth: np.ndarray            # Q x 4 at the end of the interval
    cm: np.ndarray               # Q x 4 composite measures (NaN if unobserved)
    cm_cov: np.ndarray           # Q x 4 x 4
    posterior: FusionPrior
    objective: float
    allocation: AllocationSolution
    margins: np.ndarray


def allocate(model: IntervalModel, method: str, seed: int, trial: int, k: int,
             params: AnchorParams) -> AllocationSolution:
    if method == "anchor":
        return anchor_solve(model, params, stream(seed, trial, "anneal", k))
    if method == "uniform":
        return uniform_allocation(model)
    if method == "random":
        return random_allocation(model, stream(seed, trial, "random", k))
    raise ValueError(f"unknown method {method!r}")


def run_fusion_interval(scenario: Scenario, k: int, truths: np.ndarray, prior: FusionPrior,
                        method: str, seed: int = 0, trial: int = 0,
                        params: AnchorParams = AnchorParams(), fast_mode: bool = False,
                        noise_scale: float = 1.0) -> IntervalResult:
    """Allocate for interval ``k``, synthesise its measurements, fuse and filter.

    ``truths`` are the target states at the start of the interval.
    ``noise_scale`` multiplies every measurement standard deviation (0 gives
    noiseless measurements, used in tests).
    """
    sc = scenario
    t0 = sc.fusion_period
    schedule = interval_schedule(sc, k)
    model = IntervalModel(sc, schedule, prior)
    sol = allocate(model, method, seed, trial, k, params)
    z, blocks = sol.z, sol.blocks
    p, t, _ = model.power_dwell(z)
    interf = model.radar_interference(z, blocks)
    shape = sc.measurement_shape()
    truth_next = transition(truths, t0)
    lam = sc.normalizer

    cms = np.full((sc.num_targets, 4), np.nan)
    cm_covs = np.full((sc.num_targets, 4, 4), np.nan)
    post_state = np.empty_like(prior.state)
    post_cov = np.empty_like(prior.kalman_cov)
    for q, tgt in enumerate(sc.targets):
        gamma = process_noise(t0, tgt.process_noise_intensity)
        rng = stream(seed, trial, "noise", k, q)
        s_pred = transition(prior.state[q], t0)
        cm = cov = None
        if fast_mode:
            u = rng.standard_normal(4)
            fim = model.data_fims(z, blocks, truth_next)[q]
            try:
                cov = spd_inverse(fim)
                cm = truth_next[q] + np.linalg.cholesky(cov) @ u
            except (SingularMatrixError, np.linalg.LinAlgError):
                cm = None
        else:
            records = []
            for i, radar in enumerate(sc.radars):
                times = schedule.times[i][q]
                noise = rng.standard_normal((len(times), 3))   # drawn even if unused
                pt = p[i, q] * t[i, q]
                if pt <= 0:
                    continue
                var = (interf[i] + radar.noise_power) / pt * shape[i, q]
                for tm, u in zip(times, noise):
                    clean = measure(transition(truth_next[q], tm - schedule.end), radar.position)
                    value = clean + noise_scale * np.sqrt(var) * u
                    records.append(MeasurementRecord(radar.id, tgt.id, float(tm), value,
                                                     np.diag(var), radar.position))
            if records:
                try:
                    cm, cov = composite_measure_ils(records, s_pred, schedule.end, lam)
                except (SingularMatrixError, ConvergenceError) as exc:
                    log.debug("interval %d target %d: no composite measure (%s)", k, q, exc)
        if cm is None:
            f = transition_matrix(t0)
            post_state[q] = s_pred
            post_cov[q] = gamma + f @ prior.kalman_cov[q] @ f.T
            continue
        cms[q], cm_covs[q] = cm, cov
        post_state[q], post_cov[q], _, _ = kalman_update(prior.state[q], prior.kalman_cov[q],
                                                         cm, cov, t0, gamma)
    posterior = FusionPrior(model.bayes_fims(z, blocks), post_cov, post_state, schedule.end)
    return IntervalResult(k, method, truth_next, cms, cm_covs, posterior, sol.objective, sol,
                          sol.margins)


# ---------------------------------------------------------------------------
# campaigns


def initial_estimate(scenario: Scenario, seed: int, trial: int) -> np.ndarray:
    """Truth plus Gaussian noise with std 5% of each component (floored at 1)."""
    truth = scenario.initial_states()
    rng = stream(seed, trial, "init")
    return truth + 0.05 * np.maximum(np.abs(truth), 1.0) * rng.standard_normal(truth.shape)


@dataclass
class TrialRecord:
    trial: int
    method: str
    interval: int
    estimates: np.ndarray        # Q x 4 posterior states
    truth: np.ndarray            # Q x 4
    objective: float
    margins: np.ndarray
    objective_trace: list[float]
    z: np.ndarray
    blocks: tuple[int, ...]


def run_trial(scenario: Scenario, trial: int, intervals: int, methods: Sequence[str],
              seed: int, params: AnchorParams = AnchorParams(),
              fast_mode: bool = False) -> list[TrialRecord]:
    out = []
    start = initial_estimate(scenario, seed, trial)
    for method in methods:
        prior = initial_prior(scenario, start)
        truths = scenario.initial_states()
        for k in range(intervals):
            res = run_fusion_interval(scenario, k, truths, prior, method, seed, trial,
                                      params, fast_mode)
            out.append(TrialRecord(trial, method, k, res.posterior.state.copy(), res.truth,
                                   res.objective, res.margins,
                                   list(res.allocation.objective_trace),
                                   res.allocation.z, res.allocation.blocks))
            prior, truths = res.posterior, res.truth
    return out


def _trial_job(args):
    return run_trial(*args)


@dataclass
class CampaignResult:
    methods: tuple[str, ...]
    intervals: int
    trials: int
    seed: int
    records: list[TrialRecord] = field(repr=False)
    normalizer: np.ndarray = field(repr=False, default=None)

    def _select(self, method: str, k: int) -> list[TrialRecord]:
        return [r for r in self.records if r.method == method and r.interval == k]

    def crmse(self, method: str, k: int, part: str = "all") -> float:
        recs = self._select(method, k)
        est = np.array([r.estimates for r in recs])
        truth = recs[0].truth
        lam = self.normalizer.copy()
        if part == "position":
            lam = np.diag([1.0, 0.0, 1.0, 0.0])
        elif part == "velocity":
            lam = np.diag([0.0, 1.0, 0.0, 1.0])
        return crmse(est, truth, lam)

    def mean_objective(self, method: str, k: int) -> float:
        recs = self._select(method, k)
        return math.fsum(r.objective for r in recs) / len(recs)

    def crmse_table(self) -> dict[str, list[float]]:
        return {m: [self.crmse(m, k) for k in range(self.intervals)] for m in self.methods}


def run_campaign(scenario: Scenario, intervals: int, trials: int,
                 methods: Sequence[str] = METHODS, seed: int = 0,
                 params: AnchorParams = AnchorParams(), fast_mode: bool = False,
                 jobs: int = 1) -> CampaignResult:
    if intervals < 1 or trials < 1:
        raise ValueError("intervals and trials must be >= 1")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    jobs_args = [(scenario, n, intervals, methods, seed, params, fast_mode) for n in range(trials)]
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_trial_job, jobs_args))
    else:
        chunks = [_trial_job(a) for a in jobs_args]
    records = [r for c in chunks for r in c]
    return CampaignResult(methods, intervals, trials, seed, records, scenario.normalizer)
