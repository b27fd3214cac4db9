"""Grasp-configuration generation stage: sample, filter, score, rank."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..geometry.mesh import TriMesh
from ..parallel import pmap
from .candidates import FLOOR_EPS, N_CANDIDATES, N_GCS, generate_gcs, sample_candidate_points
from .contacts import BASE_MU, CONE_SIDES
from .freespace import FreeSpace
from .ranking import rank_gcs
from .reachability import RESTARTS, THETA_MAX, reachability_check
from .stability import FORCE_BUDGET, partial_force_closure, partial_min_wrench

log = logging.getLogger(__name__)


@dataclass
class GraspParams:
    n_candidates: int = N_CANDIDATES
    n_gcs: int = N_GCS
    mu: float = BASE_MU
    cone_sides: int = CONE_SIDES
    force_budget: float = FORCE_BUDGET
    theta_max: float = float(THETA_MAX)
    reach_restarts: int = RESTARTS
    floor_eps: float = FLOOR_EPS
    grid_res: float = 0.005


@dataclass
class GraspSynthesisResult:
    gcs: list  # every generated GC, in generation order
    ranked: list  # stable, reachable, finite-length GCs in rank order
    free_space: FreeSpace


def synthesize_grasps(mesh: TriMesh, ffo, params: GraspParams | None = None, seed: int = 0,
                      free_space: FreeSpace | None = None) -> GraspSynthesisResult:
    p = params or GraspParams()
    com = mesh.center_of_mass
    scale = mesh.bounding_sphere_radius
    cands = sample_candidate_points(mesh, ffo, p.n_candidates, seed, p.floor_eps, p.mu)
    log.info("stage=gcgen candidates=%d", len(cands))
    gcs = generate_gcs(cands, p.n_gcs, seed)

    def check(g):
        stable = partial_force_closure(g.contacts, com, p.cone_sides, scale)
        reach = stable and reachability_check(g.positions, g.normals, p.theta_max,
                                               p.reach_restarts, seed=seed + g.index)
        return stable, bool(reach)

    for g, (s, r) in zip(gcs, pmap(check, gcs)):
        g.stable, g.reachable = bool(s), r
    good = [g for g in gcs if g.stable and g.reachable]
    log.info("stage=gcgen generated=%d stable=%d stable_reachable=%d", len(gcs),
             sum(g.stable for g in gcs), len(good))
    if not good:
        return GraspSynthesisResult(gcs, [], free_space)

    wrenches = pmap(lambda g: partial_min_wrench(g.contacts, com, p.cone_sides, scale, p.force_budget), good)
    fs = free_space or FreeSpace(mesh, ffo, p.grid_res)
    needed = sorted({i for g in good for i in g.candidate_ids})
    lengths = dict(zip(needed, pmap(lambda i: fs.length_to(cands[i].position, cands[i].normal), needed)))
    for g, w in zip(good, wrenches):
        g.partial_min_wrench = float(w)
        g.finger_length = max(lengths[i] for i in g.candidate_ids)
    ranked = rank_gcs(good)
    log.info("stage=gcgen ranked=%d best_rank_size=%d", len(ranked),
             sum(1 for g in ranked if g.pareto_rank == 1))
    return GraspSynthesisResult(gcs, ranked, fs)
