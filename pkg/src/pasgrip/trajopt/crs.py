"""Controlled random search with local mutation (CRS2-LM).

Kaelo & Ali's variant of Price's CRS: a population is drawn uniformly in the
box; each trial reflects a random point through the centroid of a random
simplex that contains the current best. If the reflection does not beat the
worst member, a local mutation around the best point is tried instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CRSResult:
    x: np.ndarray
    f: float
    evals: int
    history: list = field(default_factory=list)  # (eval count, best value) at each improvement
    reason: str = ""


def crs_optimize(fun, lower, upper, population: int | None = None, rel_tol: float = 1e-6,
                 budget: int = 100000, seed: int = 0, x0=None, stop=None) -> CRSResult:
    """Minimize ``fun`` over the box [lower, upper].

    ``x0`` (if given) joins the initial population. ``stop(x, f)`` is called
    whenever the best point improves; returning True ends the search.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    n = len(lo)
    if np.any(hi < lo):
        raise ValueError("upper bounds must not be below lower bounds")
    N = population or 10 * (n + 1)
    if N < n + 1:
        raise ValueError("population must be at least dimension + 1")
    rng = np.random.default_rng(seed)
    X = lo + rng.random((N, n)) * (hi - lo)
    if x0 is not None:
        X[0] = np.clip(np.asarray(x0, dtype=float), lo, hi)
    f = np.empty(N)
    best_i, evals, history = 0, 0, []

    def improved(i):
        history.append((evals, float(f[i])))
        return stop is not None and stop(X[i].copy(), float(f[i]))

    for i in range(N):
        if evals >= budget:
            X, f = X[:i], f[:i]
            break
        f[i] = fun(X[i])
        evals += 1
        if i == 0 or f[i] < f[best_i]:
            best_i = i
            if improved(i):
                return CRSResult(X[i].copy(), float(f[i]), evals, history, "stop")
    N = len(f)
    if N < n + 1:
        return CRSResult(X[best_i].copy(), float(f[best_i]), evals, history, "budget")

    worst_i = int(np.argmax(f))
    while evals < budget:
        fl, fh = f[best_i], f[worst_i]
        if fh - fl <= rel_tol * 0.5 * (abs(fl) + abs(fh)):
            return CRSResult(X[best_i].copy(), float(fl), evals, history, "rel_tol")
        others = rng.choice(N - 1, size=n, replace=False)
        others[others >= best_i] += 1
        simplex = X[others]
        g = (X[best_i] + simplex[:-1].sum(axis=0)) / n
        trial = 2.0 * g - simplex[-1]
        ft = None
        if np.all(trial >= lo) and np.all(trial <= hi):
            ft = fun(trial)
            evals += 1
        if ft is None or ft >= fh:
            if evals >= budget:
                break
            w = rng.random(n)
            trial = np.clip((1.0 + w) * X[best_i] - w * trial, lo, hi)
            ft = fun(trial)
            evals += 1
            if ft >= fh:
                continue
        X[worst_i] = trial
        f[worst_i] = ft
        if ft < fl:
            best_i = worst_i
            if improved(best_i):
                return CRSResult(X[best_i].copy(), float(ft), evals, history, "stop")
        worst_i = int(np.argmax(f))
    return CRSResult(X[best_i].copy(), float(f[best_i]), evals, history, "budget")
