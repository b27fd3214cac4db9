"""Instantaneous escape-motion test for a grasp configuration.

A gripper that has to release the object must be able to move every contact
away from the surface at once. We search for a rigid instantaneous motion
(v, omega, rotation center c) whose contact velocities point out of the
surface by at least cos(theta_max) while staying bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

THETA_MAX = np.radians(80.0)
RESTARTS = 16
STEPS = 500
STEP_SIZE = 1e-2
LOSS_TOL = 1e-6
MARGIN = 0.02  # hinge margin used while descending
CENTER_RADIUS = 10.0  # projection ball for c, in normalized units


@dataclass(frozen=True)
class InstantaneousMotion:
    v: np.ndarray
    omega: np.ndarray
    c: np.ndarray

    def contact_velocities(self, positions) -> np.ndarray:
        r = np.asarray(positions, dtype=float) - self.c
        return self.v + np.cross(self.omega, r)


def escape_loss(positions, normals, motion: InstantaneousMotion, theta_max: float = THETA_MAX) -> float:
    vi = motion.contact_velocities(positions)
    a = np.cos(theta_max) - np.einsum("ij,ij->i", vi, normals)
    b = np.linalg.norm(vi, axis=1) - 1.0
    return float(np.maximum(a, 0).sum() + np.maximum(b, 0).sum())


def _batch_loss_grad(P, N, v, w, c, cos_t, margin):
    """Loss and gradients for R parallel restarts. P, N: (k, 3); v, w, c: (R, 3)."""
    r = P[None, :, :] - c[:, None, :]  # (R, k, 3)
    vi = v[:, None, :] + np.cross(w[:, None, :], r)
    dot = np.einsum("rkj,kj->rk", vi, N)
    nv = np.linalg.norm(vi, axis=2)
    a = cos_t + margin - dot
    b = nv - (1.0 - margin)
    ma, mb = a > 0, b > 0
    loss = np.where(ma, a, 0).sum(1) + np.where(mb, b, 0).sum(1)
    g = -ma[..., None].astype(float) * N[None] + mb[..., None] * vi / np.maximum(nv, 1e-12)[..., None]
    gv = g.sum(1)
    gw = np.cross(r, g).sum(1)
    gc = np.cross(w[:, None, :], g).sum(1)
    return loss, gv, gw, gc


def reachability_check(positions, normals, theta_max: float = THETA_MAX, restarts: int = RESTARTS,
                       steps: int = STEPS, step_size: float = STEP_SIZE, seed: int = 0,
                       return_motion: bool = False):
    """Is there an instantaneous motion that lifts all contacts off together?

    Positions are centered on their centroid and scaled by their RMS radius
    first, which makes the verdict independent of object scale. Gradient
    descent runs on a slightly tightened loss; the verdict uses the exact
    loss of the best iterate seen.
    """
    P = np.asarray(positions, dtype=float)
    N = np.asarray(normals, dtype=float)
    N = N / np.linalg.norm(N, axis=1, keepdims=True)
    center = P.mean(0)
    scale = np.sqrt(((P - center) ** 2).sum(1).mean())
    if scale == 0:
        scale = 1.0
    Pn = (P - center) / scale
    cos_t = np.cos(theta_max)
    rng = np.random.default_rng(seed)
    v = rng.normal(0, 0.5, (restarts, 3))
    w = rng.normal(0, 0.5, (restarts, 3))
    c = rng.normal(0, 1.0, (restarts, 3))
    best = (np.inf, None)
    for _ in range(steps + 1):
        exact, *_ = _batch_loss_grad(Pn, N, v, w, c, cos_t, 0.0)
        i = int(np.argmin(exact))
        if exact[i] < best[0]:
            best = (float(exact[i]), (v[i].copy(), w[i].copy(), c[i].copy()))
        if best[0] < LOSS_TOL:
            break
        _, gv, gw, gc = _batch_loss_grad(Pn, N, v, w, c, cos_t, MARGIN)
        v -= step_size * gv
        w -= step_size * gw
        c -= step_size * gc
        nc = np.linalg.norm(c, axis=1, keepdims=True)
        c *= np.minimum(1.0, CENTER_RADIUS / np.maximum(nc, 1e-12))
    ok = best[0] < LOSS_TOL
    if not return_motion:
        return ok
    v, w, c = best[1]
    # undo normalization: velocities scale with w*r, so omega shrinks by `scale`
    motion = InstantaneousMotion(v, w / scale, c * scale + center)
    return ok, motion
