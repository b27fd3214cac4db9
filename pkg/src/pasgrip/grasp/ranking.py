"""Pareto ranking of grasp configurations (maximize wrench, minimize finger length)."""

from __future__ import annotations

import numpy as np


def pareto_fronts(strength, length) -> np.ndarray:
    """1-based front index of each point under (max strength, min length).

    Sweep in order of increasing length (ties: higher strength first). In
    that order the last member of a front has the largest strength of the
    front, so only it needs to be compared against a new point.
    """
    s = np.asarray(strength, dtype=float)
    L = np.asarray(length, dtype=float)
    order = np.lexsort((-s, L))
    ranks = np.zeros(len(s), dtype=int)
    tails = []  # (strength, length) of the last point added to each front
    for i in order:
        f = 0
        while f < len(tails):
            ts, tl = tails[f]
            if not (ts > s[i] or (ts == s[i] and tl < L[i])):
                break
            f += 1
        if f == len(tails):
            tails.append((s[i], L[i]))
        else:
            tails[f] = (s[i], L[i])
        ranks[i] = f + 1
    return ranks


def rank_gcs(gcs: list) -> list:
    """Assign ``pareto_rank`` and return GCs ordered front by front.

    Inside a front the order is ascending finger length, then GC index.
    GCs with an infinite finger length are dropped.
    """
    pool = [g for g in gcs if g.finger_length is not None and np.isfinite(g.finger_length)]
    if not pool:
        return []
    ranks = pareto_fronts([g.partial_min_wrench for g in pool], [g.finger_length for g in pool])
    for g, r in zip(pool, ranks):
        g.pareto_rank = int(r)
    return sorted(pool, key=lambda g: (g.pareto_rank, g.finger_length, g.index))
