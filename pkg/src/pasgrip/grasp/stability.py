"""Partial force closure under gravity and the partial minimum wrench metric."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.stats import norm, qmc

from .contacts import CONE_SIDES, GRAVITY, wrench_basis

FEAS_TOL = 1e-8
FORCE_BUDGET = 4.0  # total normal force, in units of object weight
N_DIRECTIONS = 64

# contacts must cancel the gravity wrench [g; 0]
GRAVITY_WRENCH = np.concatenate([GRAVITY, np.zeros(3)])


def grasp_matrix(contacts, com, q: int = CONE_SIDES, torque_scale: float = 1.0):
    """Stacked cone wrenches (6, K) and the normal-force share of each column."""
    cols, normal_share = [], []
    for c in contacts:
        W = wrench_basis(c, com, q, torque_scale)
        cols.append(W)
        normal_share.append(np.full(len(W), 1.0 / np.sqrt(1.0 + c.mu ** 2)))
    return np.vstack(cols).T, np.concatenate(normal_share)


def _degenerate(contacts) -> bool:
    p = np.array([c.position for c in contacts])
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    return bool((d[np.triu_indices(len(p), 1)] < 1e-9).any())


def partial_force_closure(contacts, com, q: int = CONE_SIDES, torque_scale: float = 1.0,
                          gravity=GRAVITY) -> bool:
    """Can non-negative cone forces cancel the unit gravity wrench?

    Phase-one LP: minimize the L1 residual of W k = -[g; 0] over k >= 0;
    stable iff the optimum is below ``FEAS_TOL``. Contact friction is taken
    as given, so a rotated scene passes a rotated ``gravity`` here.
    """
    if _degenerate(contacts):
        return False
    W, _ = grasp_matrix(contacts, com, q, torque_scale)
    return wrench_feasible(W, -np.concatenate([np.asarray(gravity, dtype=float), np.zeros(3)]))


def wrench_feasible(W, b) -> bool:
    """True iff W k = b has a solution with k >= 0 (L1 residual <= FEAS_TOL)."""
    return _residual(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) <= FEAS_TOL


def _residual(W, b) -> float:
    m, k = W.shape
    A = np.hstack([W, np.eye(m), -np.eye(m)])
    c = np.concatenate([np.zeros(k), np.ones(2 * m)])
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        return np.inf
    return float(res.fun)


def balancing_forces(contacts, com, q: int = CONE_SIDES, torque_scale: float = 1.0):
    """Least total normal force solution of the gravity balance.

    Returns per-contact force vectors (3, 3) or None when infeasible.
    """
    W, share = grasp_matrix(contacts, com, q, torque_scale)
    res = linprog(share, A_eq=W, b_eq=-GRAVITY_WRENCH, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    k = res.x
    forces = []
    i = 0
    for c in contacts:
        nq = 1 if c.mu == 0.0 else q
        forces.append(W[:3, i:i + nq] @ k[i:i + nq])
        i += nq
    return np.array(forces)


@lru_cache(maxsize=None)
def disturbance_directions(count: int = N_DIRECTIONS) -> np.ndarray:
    """Fixed quasi-uniform unit directions in R^6.

    The 12 signed axes come first (so pure extra gravity is always probed);
    the rest are scrambled-Sobol points pushed through the normal quantile
    function and normalized.
    """
    axes = np.vstack([np.eye(6), -np.eye(6)])
    rest = max(count - len(axes), 0)
    if rest == 0:
        return axes[:count]
    u = qmc.Sobol(d=6, scramble=True, seed=12345).random(int(2 ** np.ceil(np.log2(rest))))[:rest]
    g = norm.ppf(np.clip(u, 1e-9, 1 - 1e-9))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([axes, g])


def partial_min_wrench(contacts, com, q: int = CONE_SIDES, torque_scale: float = 1.0,
                       f_max: float = FORCE_BUDGET, directions=None) -> float:
    """Smallest disturbance that breaks the gravity balance under a force budget.

    For every disturbance direction u, solve max alpha s.t. W k = -([g;0] +
    alpha u), sum of normal forces <= f_max, k >= 0; return the minimum over
    directions (0 when gravity alone is already infeasible).
    """
    if _degenerate(contacts):
        return 0.0
    W, share = grasp_matrix(contacts, com, q, torque_scale)
    U = disturbance_directions() if directions is None else np.asarray(directions, dtype=float)
    m, k = W.shape
    b = -GRAVITY_WRENCH
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.concatenate([share, [0.0]])[None, :]
    best = np.inf
    for u in U:
        A_eq = np.hstack([W, u[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=[f_max], A_eq=A_eq, b_eq=b, bounds=(0, None), method="highs")
        if res.status == 2:  # infeasible even at alpha = 0
            return 0.0
        if res.status != 0:
            continue
        best = min(best, float(res.x[-1]))
        if best <= 0.0:
            return 0.0
    return 0.0 if not np.isfinite(best) else best
