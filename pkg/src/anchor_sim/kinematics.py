"""Constant-velocity target motion, the range/angle/Doppler measurement model
and composite-measure estimation by Gauss-Newton iterated least squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, GeometryError, SingularMatrixError

_MIN_RANGE = 1e-9


def transition_matrix(dt: float) -> np.ndarray:
    """F(dt) = I2 kron [[1, dt], [0, 1]] for the state [x, vx, y, vy]."""
    return np.array([[1.0, dt, 0.0, 0.0],
                     [0.0, 1.0, 0.0, 0.0],
                     [0.0, 0.0, 1.0, dt],
                     [0.0, 0.0, 0.0, 1.0]])


def process_noise(dt: float, intensity: float) -> np.ndarray:
    """Discrete white-noise-acceleration covariance over a gap ``dt``."""
    block = intensity * np.array([[dt**3 / 3.0, dt**2 / 2.0],
                                  [dt**2 / 2.0, dt]])
    return np.kron(np.eye(2), block)


def transition(state: np.ndarray, dt: float) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    out = s.copy()
    out[..., 0] = s[..., 0] + s[..., 1] * dt
    out[..., 2] = s[..., 2] + s[..., 3] * dt
    return out


def measure(state: np.ndarray, radar_position: Sequence[float]) -> np.ndarray:
    """(range, four-quadrant bearing, radial velocity) of ``state`` seen from a radar."""
    x, vx, y, vy = np.asarray(state, dtype=float)
    dx, dy = x - radar_position[0], y - radar_position[1]
    r = np.hypot(dx, dy)
    if r < _MIN_RANGE:
        raise GeometryError("target coincides with radar position")
    return np.array([r, np.arctan2(dy, dx), (dx * vx + dy * vy) / r])


def _jacobian_h(state: np.ndarray, radar_position: Sequence[float]) -> np.ndarray:
    x, vx, y, vy = state
    dx, dy = x - radar_position[0], y - radar_position[1]
    r2 = dx * dx + dy * dy
    r = np.sqrt(r2)
    if r < _MIN_RANGE:
        raise GeometryError("target coincides with radar position")
    nu = (dx * vx + dy * vy) / r
    return np.array([
        [dx / r, 0.0, dy / r, 0.0],
        [-dy / r2, 0.0, dx / r2, 0.0],
        [(vx - nu * dx / r) / r, dx / r, (vy - nu * dy / r) / r, dy / r],
    ])


def measurement_jacobian(fusion_state: np.ndarray, radar_position: Sequence[float],
                         dt_back: float) -> np.ndarray:
    """Jacobian of ``measure(transition(s, -dt_back))`` with respect to the fusion-time state ``s``."""
    fusion_state = np.asarray(fusion_state, dtype=float)
    s_m = transition(fusion_state, -dt_back)
    return _jacobian_h(s_m, radar_position) @ transition_matrix(-dt_back)


@dataclass(frozen=True)
class MeasurementRecord:
    radar_id: int
    target_id: int
    time: float
    value: np.ndarray
    noise_cov: np.ndarray
    radar_position: tuple[float, float]


def synthesize_measurements(true_state: np.ndarray, fusion_time: float, times: Sequence[float],
                            covs: Sequence[np.ndarray], radar_position: Sequence[float],
                            rng: np.random.Generator, radar_id: int = 0,
                            target_id: int = 0) -> list[MeasurementRecord]:
    """Noisy measurements of a constant-velocity target at each time in ``times``.

    ``covs[m]`` is the (diagonal) noise covariance of measurement ``m``.
    """
    out = []
    pos = (float(radar_position[0]), float(radar_position[1]))
    for t, cov in zip(times, covs):
        cov = np.asarray(cov, dtype=float)
        clean = measure(transition(true_state, t - fusion_time), pos)
        noise = rng.standard_normal(3) * np.sqrt(np.diag(cov))
        out.append(MeasurementRecord(radar_id, target_id, float(t), clean + noise, cov, pos))
    return out


def _wrap(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2 * np.pi) - np.pi


def _stack(records: Sequence[MeasurementRecord], fusion_time: float):
    z = np.array([r.value for r in records])
    w = np.array([1.0 / np.diag(r.noise_cov) for r in records])
    dts = np.array([fusion_time - r.time for r in records])
    pos = np.array([r.radar_position for r in records])
    return z, w, dts, pos


def _model(state: np.ndarray, dts: np.ndarray, pos: np.ndarray):
    """Predicted measurements (M x 3) and Jacobians (M x 3 x 4) for a batch of records."""
    x = state[0] - state[1] * dts - pos[:, 0]
    y = state[2] - state[3] * dts - pos[:, 1]
    vx, vy = state[1], state[3]
    r2 = x * x + y * y
    r = np.sqrt(r2)
    if np.any(r < _MIN_RANGE):
        raise GeometryError("target coincides with radar position")
    nu = (x * vx + y * vy) / r
    h = np.stack([r, np.arctan2(y, x), nu], axis=1)
    jac = np.zeros((len(dts), 3, 4))
    jac[:, 0, 0] = x / r
    jac[:, 0, 2] = y / r
    jac[:, 1, 0] = -y / r2
    jac[:, 1, 2] = x / r2
    jac[:, 2, 0] = (vx - nu * x / r) / r
    jac[:, 2, 1] = x / r
    jac[:, 2, 2] = (vy - nu * y / r) / r
    jac[:, 2, 3] = y / r
    # chain rule through s_m = F(-dt) s
    jac[:, :, 1] -= jac[:, :, 0] * dts[:, None]
    jac[:, :, 3] -= jac[:, :, 2] * dts[:, None]
    return h, jac


def fim_from_records(records: Sequence[MeasurementRecord], state: np.ndarray,
                     fusion_time: float) -> np.ndarray:
    _, w, dts, pos = _stack(records, fusion_time)
    _, jac = _model(np.asarray(state, float), dts, pos)
    return np.einsum("mki,mk,mkj->ij", jac, w, jac)


def _cost(z, w, state, dts, pos):
    h, jac = _model(state, dts, pos)
    res = z - h
    res[:, 1] = _wrap(res[:, 1])
    return 0.5 * float(np.sum(w * res * res)), res, jac


def composite_measure_ils(records: Sequence[MeasurementRecord], predicted_state: np.ndarray,
                          fusion_time: float, normalizer: np.ndarray | None = None,
                          tol: float = 1e-6, max_iters: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-likelihood fusion-time state from one interval's measurements.

    Gauss-Newton from ``predicted_state`` with step halving. Returns the
    estimate and the inverse FIM at the estimate.
    """
    if not records:
        raise SingularMatrixError("no measurements to fuse")
    lam = np.eye(4) if normalizer is None else np.asarray(normalizer, float)
    z, w, dts, pos = _stack(records, fusion_time)
    state = np.asarray(predicted_state, dtype=float).copy()
    cost, res, jac = _cost(z, w, state, dts, pos)
    for _ in range(max_iters):
        fim = np.einsum("mki,mk,mkj->ij", jac, w, jac)
        grad = np.einsum("mki,mk,mk->i", jac, w, res)
        step = _solve_normalized(fim, grad, lam)
        t = 1.0
        for _ in range(11):
            cand = state + t * step
            c_cost, c_res, c_jac = _cost(z, w, cand, dts, pos)
            if c_cost <= cost or t < 1e-3:
                break
            t *= 0.5
        state, cost, res, jac = cand, c_cost, c_res, c_jac
        if np.linalg.norm(lam @ (t * step)) < tol:
            break
    else:
        raise ConvergenceError(f"composite measure did not converge in {max_iters} iterations")
    fim = np.einsum("mki,mk,mkj->ij", jac, w, jac)
    return state, spd_inverse(fim, lam)


def _solve_normalized(fim: np.ndarray, rhs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # solve in units where position and T0*velocity are comparable
    lam_inv = np.diag(1.0 / np.diag(lam))
    a = lam_inv @ fim @ lam_inv
    return lam_inv @ _chol_solve(a, lam_inv @ rhs)


def _chol_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.diag(a))
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise SingularMatrixError("information matrix has a non-positive diagonal")
    a_s = a / np.outer(d, d)
    try:
        c = np.linalg.cholesky(a_s)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("information matrix is not positive definite") from exc
    if np.min(np.diag(c)) ** 2 < 1e-12:
        raise SingularMatrixError("information matrix is numerically singular")
    y = np.linalg.solve(c, b / d[:, None] if b.ndim == 2 else b / d)
    x = np.linalg.solve(c.T, y)
    return x / d[:, None] if b.ndim == 2 else x / d


def spd_inverse(a: np.ndarray, normalizer: np.ndarray | None = None) -> np.ndarray:
    """Inverse of an SPD matrix via scaled Cholesky; raises on (near-)singularity."""
    a = 0.5 * (a + a.T)
    inv = _chol_solve(a, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def fast_composite_measure(true_state: np.ndarray, fim: np.ndarray,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw the composite measure from N(truth, J^-1) instead of running ILS."""
    cov = spd_inverse(fim)
    chol = np.linalg.cholesky(cov)
    return np.asarray(true_state, float) + chol @ rng.standard_normal(4), cov
