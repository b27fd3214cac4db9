"""Candidate contact sampling and random grasp-configuration generation."""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

from ..geometry.mesh import TriMesh, sample_surface_points
from ..geometry.queries import points_inside, segments_clear
from .contacts import BASE_MU, ContactPoint, GraspConfiguration
from .freespace import CONTACT_PROBE

N_CANDIDATES = 1000
N_GCS = 3000
FLOOR_EPS = 0.002


class CandidateError(RuntimeError):
    pass


def sample_candidate_points(mesh: TriMesh, ffo, count: int = N_CANDIDATES, seed: int = 0,
                            floor_eps: float = FLOOR_EPS, mu: float = BASE_MU) -> list:
    """Surface points a finger could reach on a straight line from the FFO.

    Samples are area-uniform; points within ``floor_eps`` of the floor are
    discarded, as are points whose straight segment to the FFO hits the mesh.
    The segment ends slightly outside the surface (along +normal) so the
    contact's own face does not count as an obstruction.
    """
    ffo = np.asarray(ffo, dtype=float)
    if ffo[2] <= 0 or points_inside(mesh, ffo[None])[0]:
        raise CandidateError("the FFO must be above the floor and outside the object; reposition it")
    pts, nrm, _ = sample_surface_points(mesh, count, seed)
    keep = pts[:, 2] > floor_eps
    probes = pts + CONTACT_PROBE * nrm
    keep &= segments_clear(mesh, np.broadcast_to(ffo, probes.shape), probes)
    if not keep.any():
        raise CandidateError("no surface point is visible from the FFO above the floor; "
                             "reposition the object or the robot")
    return [ContactPoint.on_surface(p, n, mu) for p, n in zip(pts[keep], nrm[keep])]


def sample_triples(n: int, count: int, seed: int = 0) -> list:
    """``count`` distinct unordered index triples from range(n), uniformly at random."""
    if n < 3:
        raise CandidateError(f"need at least 3 candidate points, got {n}")
    total = comb(n, 3)
    if count >= total:
        return list(itertools.combinations(range(n), 3))
    rng = np.random.default_rng(seed)
    if 2 * count > total:
        everything = list(itertools.combinations(range(n), 3))
        pick = rng.choice(total, size=count, replace=False)
        return [everything[i] for i in pick]
    seen, out = set(), []
    while len(out) < count:
        t = tuple(sorted(int(i) for i in rng.choice(n, 3, replace=False)))
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def generate_gcs(candidates: list, count: int = N_GCS, seed: int = 0) -> list:
    triples = sample_triples(len(candidates), count, seed)
    return [GraspConfiguration([candidates[i] for i in t], index=k, candidate_ids=t)
            for k, t in enumerate(triples)]
