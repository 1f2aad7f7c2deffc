"""Self-checks run by ``anchor-sim verify``.

Each check compares a production routine against an independent oracle
(finite differences, enumeration, Monte Carlo) and returns a ``CheckResult``.
Production functions are always reached through their module so that a test
can swap one out and watch the check fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import anchor, fim, freq_alloc, kinematics, power_time, projection, scenario


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float = 0.0
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{tag}] {self.name}: {self.value:.3e} vs {self.threshold:.1e} in {self.seconds:.2f}s{extra}"


def _timed(fn: Callable[..., CheckResult]) -> Callable[..., CheckResult]:
    def wrapper(*args, **kwargs) -> CheckResult:
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def interval_model(sc: scenario.Scenario, k: int = 0) -> fim.IntervalModel:
    """Model of interval ``k`` with a prior centred on the true initial states."""
    prior = fim.initial_prior(sc, sc.initial_states())
    return fim.IntervalModel(sc, scenario.interval_schedule(sc, k), prior)


def two_radar_scenario() -> scenario.Scenario:
    """The desk instance without its mechanical radar."""
    sc = scenario.desk_scenario()
    keep = [0, 1]
    users = tuple(replace(u, radar_to_user_gains=tuple(u.radar_to_user_gains[i] for i in keep),
                          user_to_radar_gains=tuple(u.user_to_radar_gains[i] for i in keep))
                  for u in sc.users)
    targets = tuple(replace(t, rcs=tuple(t.rcs[i] for i in keep)) for t in sc.targets)
    return sc.replace(radars=tuple(sc.radars[i] for i in keep), targets=targets, users=users,
                      name="desk2")


# ---------------------------------------------------------------------------
# fast checks


def central_gradient(f: Callable[[np.ndarray], float], z: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Fourth-order central differences."""
    g = np.zeros_like(z)
    for k in range(z.size):
        h = rel_step * max(1e-3, abs(z[k]))
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12 * h)
    return g


@_timed
def check_gradient(points: int = 100, seed: int = 0, threshold: float = 1e-6) -> CheckResult:
    """Analytic gradient of the fractional surrogate vs finite differences."""
    rng = np.random.default_rng(seed)
    models = [interval_model(scenario.desk_scenario()), interval_model(scenario.paper_scenario())]
    worst = 0.0
    for n in range(points):
        model = models[n % len(models)]
        sol = anchor.random_allocation(model, rng)
        omega = rng.uniform(0.1, 2.0, size=(model.N, model.Q)) * np.abs(
            np.einsum("iqkk->iq", model.c_tilde)) ** -1
        fp = power_time.assemble_fractional(model, omega, sol.blocks)
        _, grad = power_time.fractional_value_and_gradient(fp, sol.z)

        def value(x, fp=fp):
            num = fp.c @ x + fp.d
            den = fp.e @ x + fp.sigma2
            return float(np.sum(num / den))

        fd = central_gradient(value, sol.z)
        err = float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300))
        worst = max(worst, err)
    return CheckResult("gradient_vs_finite_differences", worst < threshold, worst, threshold,
                       detail=f"{points} points")


def random_spd(rng: np.random.Generator, n: int = 4) -> np.ndarray:
    a = rng.standard_normal((n, n)) * np.exp(rng.uniform(-3, 3, size=n))
    return a @ a.T + 1e-3 * np.eye(n)


@_timed
def check_maximin_identity(samples: int = 1000, seed: int = 1, threshold: float = 1e-10) -> CheckResult:
    """Closed-form inner minimiser attains 1 / Tr(L B^-1 L)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        t0 = float(rng.uniform(0.5, 20.0))
        lam = np.diag([1.0, t0, 1.0, t0])
        lam_t = np.diag(1.0 / np.diag(lam))
        b = random_spd(rng)
        v = power_time.optimal_v(b, lam_t)
        lhs = power_time.maximin_value(v, b, lam_t)
        rhs = 1.0 / np.trace(lam @ np.linalg.inv(b) @ lam.T)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return CheckResult("maximin_identity", worst < threshold, worst, threshold,
                       detail=f"{samples} SPD matrices")


def random_polytope(rng: np.random.Generator, n: int | None = None, m: int | None = None):
    """A nonempty {A z <= b, z >= 0} (the origin is strictly feasible) and a point to project."""
    n = int(rng.integers(2, 5)) if n is None else n
    m = int(rng.integers(1, 5)) if m is None else m
    a = rng.standard_normal((m, n))
    b = rng.uniform(0.2, 2.0, size=m)
    v = rng.standard_normal(n) * 3.0
    return v, a, b


@_timed
def check_projection(polytopes: int = 20, seed: int = 2, kkt_tol: float = 1e-8,
                     oracle_tol: float = 1e-7) -> CheckResult:
    """KKT residuals of the active-set projection and agreement with enumeration."""
    rng = np.random.default_rng(seed)
    worst_kkt = worst_gap = 0.0
    for _ in range(polytopes):
        v, a, b = random_polytope(rng)
        res = projection.project_onto_polytope(v, a, b)
        worst_kkt = max(worst_kkt, max(projection.kkt_residuals(v, a, b, res).values()))
        ref = projection.brute_force_projection(v, a, b)
        worst_gap = max(worst_gap, float(np.max(np.abs(res.z - ref))))
    ok = worst_kkt < kkt_tol and worst_gap < oracle_tol
    return CheckResult("projection_kkt_and_oracle", ok, max(worst_kkt, worst_gap), min(kkt_tol, oracle_tol),
                       detail=f"kkt {worst_kkt:.1e}, oracle gap {worst_gap:.1e}")


def desk3_assignment_problem() -> freq_alloc.AssignmentProblem:
    model = interval_model(scenario.desk_scenario())
    z, _ = model.uniform
    return freq_alloc.build_assignment_problem(model, z)


@_timed
def check_annealing(seeds: int = 10, seed: int = 3, required: float = 0.95) -> CheckResult:
    """Annealed assignment on desk3 matches exhaustive search and never beats it."""
    prob = desk3_assignment_problem()
    _, best, _ = freq_alloc.exhaustive_assignment(prob)
    init = freq_alloc.greedy_first_fit(prob.masks)
    hits, above = 0, 0
    for s in range(seeds):
        res = freq_alloc.anneal(prob, init, freq_alloc.AnnealParams(),
                                np.random.default_rng([seed, s]))
        tol = 1e-12 * max(1.0, abs(best))
        hits += abs(res.objective - best) <= tol
        above += res.objective > best + tol
    frac = hits / seeds
    return CheckResult("annealing_vs_exhaustive", frac >= required and above == 0, frac, required,
                       detail=f"{hits}/{seeds} optimal, {above} above optimum")


# ---------------------------------------------------------------------------
# full checks


def _desk2_measurement_setup():
    sc = two_radar_scenario()
    model = interval_model(sc)
    z, blocks = model.uniform
    p, t, _ = model.power_dwell(z)
    interf = model.radar_interference(z, blocks)
    shape = sc.measurement_shape()
    truth = kinematics.transition(sc.initial_states()[0], sc.fusion_period)
    sched = model.schedule
    times, variances, positions = [], [], []
    for i, radar in enumerate(sc.radars):
        var = (interf[i] + radar.noise_power) / (p[i, 0] * t[i, 0]) * shape[i, 0]
        for tm in sched.times[i][0]:
            times.append(float(tm))
            variances.append(var)
            positions.append(radar.position)
    analytic = model.data_fims(z, blocks, truth[None])[0]
    return sc, sched, truth, np.array(times), np.array(variances), np.array(positions), analytic


def _predicted(state: np.ndarray, times: np.ndarray, positions: np.ndarray, end: float) -> np.ndarray:
    return np.array([kinematics.measure(kinematics.transition(state, tm - end), pos)
                     for tm, pos in zip(times, positions)])


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


@_timed
def check_fim_monte_carlo(draws: int = 100_000, seed: int = 4, threshold: float = 0.03) -> CheckResult:
    """Analytic FIM vs the empirical covariance of finite-difference scores."""
    _, sched, truth, times, var, pos, analytic = _desk2_measurement_setup()
    rng = np.random.default_rng(seed)
    sd = np.sqrt(var)                                       # M x 3
    h0 = _predicted(truth, times, pos, sched.end)
    scores = np.zeros((draws, 4))
    chunk = 20_000
    for lo in range(0, draws, chunk):
        noise = rng.standard_normal((min(chunk, draws - lo), *h0.shape)) * sd
        for k in range(4):
            step = 1e-4 * max(1.0, abs(truth[k]))
            e = np.zeros(4)
            e[k] = step

            def loglik(shift):
                d = h0 - _predicted(truth + shift, times, pos, sched.end)
                r = noise + d
                r[..., 1] = _wrap(r[..., 1])
                return -0.5 * np.sum(r * r / var, axis=(1, 2))

            scores[lo:lo + len(noise), k] = (loglik(e) - loglik(-e)) / (2 * step)
    empirical = scores.T @ scores / draws
    err = float(np.linalg.norm(empirical - analytic) / np.linalg.norm(analytic))
    return CheckResult("fim_monte_carlo", err < threshold, err, threshold, detail=f"{draws} draws")


@_timed
def check_nees(draws: int = 500, seed: int = 5) -> CheckResult:
    """Mean NEES of composite measures against their reported covariance is ~ 4."""
    sc, sched, truth, times, var, pos, _ = _desk2_measurement_setup()
    rng = np.random.default_rng(seed)
    h0 = _predicted(truth, times, pos, sched.end)
    ids = [next(r.id for r in sc.radars if tuple(r.position) == tuple(p)) for p in pos]
    pred = kinematics.transition(truth, 0.0)
    vals = []
    for _ in range(draws):
        z = h0 + rng.standard_normal(h0.shape) * np.sqrt(var)
        recs = [kinematics.MeasurementRecord(i, 1, float(tm), zz, np.diag(v), tuple(p))
                for i, tm, zz, v, p in zip(ids, times, z, var, pos)]
        start = pred + 0.01 * np.maximum(np.abs(pred), 1.0) * rng.standard_normal(4)
        est, cov = kinematics.composite_measure_ils(recs, start, sched.end, sc.normalizer)
        err = est - truth
        vals.append(float(err @ np.linalg.solve(cov, err)))
    mean = math.fsum(vals) / draws
    band = 3.0 * math.sqrt(8.0 / draws)
    return CheckResult("composite_measure_nees", abs(mean - 4.0) < band, abs(mean - 4.0), band,
                       detail=f"mean NEES {mean:.3f} over {draws} draws")


FAST = (check_gradient, check_maximin_identity, check_projection, check_annealing)
FULL = FAST + (check_fim_monte_carlo, check_nees)


def run_checks(level: str = "fast") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError(f"unknown verify level {level!r}")
    return [check() for check in (FAST if level == "fast" else FULL)]
