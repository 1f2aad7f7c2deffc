"""Euclidean projection onto {z : A z <= b, z >= 0}.

The constraint counts here are tiny (a few dozen rows), so an exact dual
active-set method (Goldfarb-Idnani with identity Hessian) is both fast and
free of external solver dependencies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InfeasibleError


@dataclass
class ProjectionResult:
    z: np.ndarray
    multipliers: np.ndarray   # one per row of [A; -I]
    active: list[int]
    iterations: int


def _stack(a: np.ndarray, b: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).reshape(-1)
    g = np.vstack([a, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    norms = np.linalg.norm(g, axis=1)
    return g, h, norms


def project_onto_polytope(v: np.ndarray, a: np.ndarray, b: np.ndarray,
                          tol: float = 1e-12, names: list[str] | None = None) -> ProjectionResult:
    """argmin ||z - v||^2 subject to a z <= b, z >= 0.

    Rows are scaled to unit norm internally; returned multipliers refer to the
    original rows of ``[a; -I]``.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    g, h, norms = _stack(a, b, n)
    m = g.shape[0]
    zero_rows = norms == 0
    if np.any(h[zero_rows] < -tol):
        k = int(np.flatnonzero(zero_rows & (h < -tol))[0])
        raise InfeasibleError(names[k] if names else f"row {k}", "0 <= negative bound")
    safe = np.where(zero_rows, 1.0, norms)
    gn, hn = g / safe[:, None], h / safe
    scale = max(1.0, float(np.max(np.abs(v))), float(np.max(np.abs(hn), initial=0.0)))

    x = v.copy()
    active: list[int] = []
    lam = np.zeros(0)
    it = 0
    max_it = 50 * (m + n) + 100
    while True:
        viol = gn @ x - hn
        viol[zero_rows] = -np.inf
        if active:
            viol[active] = -np.inf
        p = int(np.argmax(viol))
        if viol[p] <= tol * scale:
            break
        lam_p = 0.0
        while True:
            it += 1
            if it > max_it:
                raise ConvergenceError("projection active-set iteration limit reached")
            a_p = gn[p]
            if active:
                nmat = gn[active].T
                try:
                    r = np.linalg.solve(nmat.T @ nmat, nmat.T @ a_p)
                except np.linalg.LinAlgError:
                    r = np.linalg.lstsq(nmat, a_p, rcond=None)[0]
                zdir = a_p - nmat @ r
            else:
                r = np.zeros(0)
                zdir = a_p
            s_p = a_p @ x - hn[p]
            # partial step: largest move before an active multiplier hits zero
            t2, drop = np.inf, -1
            for idx, rk in enumerate(r):
                if rk > 1e-14 and lam[idx] / rk < t2:
                    t2, drop = lam[idx] / rk, idx
            zz = float(zdir @ zdir)
            if zz <= 1e-24:
                if drop < 0:
                    name = names[p] if names and p < len(names) else f"row {p}"
                    raise InfeasibleError(name, "constraint set is empty")
                lam = lam - t2 * r
                lam_p += t2
                active.pop(drop)
                lam = np.delete(lam, drop)
                continue
            t1 = s_p / float(a_p @ zdir)
            t = min(t1, t2)
            x = x - t * zdir
            lam = lam - t * r
            lam_p += t
            if t1 <= t2:
                active.append(p)
                lam = np.append(lam, lam_p)
                break
            active.pop(drop)
            lam = np.delete(lam, drop)
    mult = np.zeros(m)
    for k, l in zip(active, lam):
        mult[k] = max(l, 0.0) / safe[k]
    return ProjectionResult(x, mult, active, it)


def kkt_residuals(v: np.ndarray, a: np.ndarray, b: np.ndarray,
                  res: ProjectionResult) -> dict[str, float]:
    """Primal, dual, complementarity and stationarity residuals of a projection."""
    v = np.asarray(v, dtype=float)
    g, h, _ = _stack(a, b, v.size)
    z, mu = res.z, res.multipliers
    slack = g @ z - h
    return {
        "primal": float(max(0.0, np.max(slack, initial=0.0))),
        "dual": float(max(0.0, -np.min(mu, initial=0.0))),
        "complementarity": float(np.max(np.abs(mu * slack), initial=0.0)),
        "stationarity": float(np.max(np.abs(z - v + g.T @ mu))),
    }


def brute_force_projection(v: np.ndarray, a: np.ndarray, b: np.ndarray,
                           tol: float = 1e-9) -> np.ndarray:
    """Reference projection by enumerating active sets (tiny problems only)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    g, h, _ = _stack(a, b, n)
    m = g.shape[0]
    best, best_d = None, np.inf
    for k in range(0, min(n, m) + 1):
        for act in itertools.combinations(range(m), k):
            ga, ha = g[list(act)], h[list(act)]
            if k:
                gram = ga @ ga.T
                if np.linalg.matrix_rank(gram) < k:
                    continue
                lam = np.linalg.solve(gram, ga @ v - ha)
                if np.any(lam < -tol):
                    continue
                z = v - ga.T @ lam
            else:
                z = v.copy()
            if np.all(g @ z - h <= tol * max(1.0, np.max(np.abs(h)))):
                d = float(np.sum((z - v) ** 2))
                if d < best_d:
                    best, best_d = z, d
    if best is None:
        raise InfeasibleError("polytope", "no active set yields a feasible KKT point")
    return best
