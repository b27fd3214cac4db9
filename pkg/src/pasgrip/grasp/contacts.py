"""Contacts, friction cones, and grasp configurations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

GRAVITY = np.array([0.0, 0.0, -1.0])
BASE_MU = 0.5
CONE_SIDES = 8


def effective_friction(normal, mu: float = BASE_MU) -> float:
    """Friction available at a contact: only downward-facing surfaces grip.

    Top-facing contacts get zero friction since gravity alone does not press
    the gripper into them.
    """
    n = np.asarray(normal, dtype=float)
    return max(0.0, float(n @ GRAVITY)) * mu


@dataclass(frozen=True)
class ContactPoint:
    position: np.ndarray
    normal: np.ndarray  # outward surface normal
    mu: float = 0.0  # effective friction coefficient

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        ln = np.linalg.norm(n)
        if ln == 0:
            raise ValueError("contact normal must be non-zero")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "normal", n / ln)
        if self.mu < 0:
            raise ValueError("friction coefficient must be non-negative")

    @classmethod
    def on_surface(cls, position, normal, mu: float = BASE_MU) -> "ContactPoint":
        """Contact whose friction is derived from its orientation to gravity."""
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(position, n, effective_friction(n, mu))

    def to_dict(self) -> dict:
        return {"position": [float(v) for v in self.position], "normal": [float(v) for v in self.normal]}


@dataclass
class GraspConfiguration:
    contacts: list
    index: int = -1  # position in the generated list; used for tie-breaking
    candidate_ids: tuple = ()
    stable: Optional[bool] = None
    reachable: Optional[bool] = None
    partial_min_wrench: Optional[float] = None
    finger_length: Optional[float] = None
    pareto_rank: Optional[int] = None

    def __post_init__(self):
        if len(self.contacts) != 3:
            raise ValueError("a grasp configuration has exactly three contacts")

    @property
    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.contacts])

    @property
    def normals(self) -> np.ndarray:
        return np.array([c.normal for c in self.contacts])

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "contacts": [c.to_dict() for c in self.contacts],
            "stable": self.stable,
            "reachable": self.reachable,
            "partial_min_wrench": self.partial_min_wrench,
            "finger_length": _finite_or_none(self.finger_length),
            "pareto_rank": self.pareto_rank,
        }

    @classmethod
    def from_dict(cls, d: dict, mu: float = BASE_MU) -> "GraspConfiguration":
        contacts = [ContactPoint.on_surface(c["position"], c["normal"], mu) for c in d["contacts"]]
        fl = d.get("finger_length")
        return cls(contacts, index=d.get("index", -1), stable=d.get("stable"), reachable=d.get("reachable"),
                   partial_min_wrench=d.get("partial_min_wrench"),
                   finger_length=fl, pareto_rank=d.get("pareto_rank"))


def _finite_or_none(x):
    if x is None:
        return None
    return float(x) if np.isfinite(x) else None


def tangent_basis(n: np.ndarray):
    a = np.eye(3)[int(np.argmin(np.abs(n)))]
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def wrench_basis(contact: ContactPoint, com, q: int = CONE_SIDES, torque_scale: float = 1.0) -> np.ndarray:
    """Edges of the polyhedral friction cone as unit-force wrenches, (q, 6).

    Forces push into the object (about -normal); torques are taken about
    ``com`` and divided by ``torque_scale``. A frictionless contact yields
    the single normal wrench.
    """
    if q < 3:
        raise ValueError("a friction cone needs at least 3 sides")
    n = contact.normal
    if contact.mu == 0.0:
        forces = -n[None, :]
    else:
        t1, t2 = tangent_basis(n)
        phi = 2.0 * np.pi * np.arange(q) / q
        forces = -n + contact.mu * (np.cos(phi)[:, None] * t1 + np.sin(phi)[:, None] * t2)
        forces /= np.linalg.norm(forces, axis=1, keepdims=True)
    r = contact.position - np.asarray(com, dtype=float)
    torques = np.cross(r, forces) / torque_scale
    return np.hstack([forces, torques])
