"""Isotropic remeshing: split / collapse / flip / tangential relaxation.

Edges longer than 4/3 of the target are split, shorter than 4/5 collapsed,
flips drive valences toward 6, and relaxed vertices are projected back onto
the input surface. Sharp creases (dihedral above ``feature_angle``) are kept:
crease vertices slide only along their crease and corners never move.
"""

from __future__ import annotations

import numpy as np

from .mesh import MeshError, TriMesh
from .queries import closest_points

SMOOTH, CREASE, CORNER = 0, 1, 2


def _ekey(a, b):
    return (a, b) if a < b else (b, a)


class _Remesher:
    def __init__(self, mesh: TriMesh, feature_angle: float):
        self.src = mesh
        self.V = [np.array(v) for v in mesh.vertices]
        self.F = [list(map(int, f)) for f in mesh.faces]
        self.alive = [True] * len(self.F)
        self.vf = [set() for _ in self.V]
        for i, f in enumerate(self.F):
            for v in f:
                self.vf[v].add(i)
        self.features = set()
        n = mesh.face_normals
        efaces: dict = {}
        for i, f in enumerate(self.F):
            for k in range(3):
                efaces.setdefault(_ekey(f[k], f[(k + 1) % 3]), []).append(i)
        cos_lim = np.cos(np.radians(feature_angle))
        for e, fs in efaces.items():
            if len(fs) == 2 and float(n[fs[0]] @ n[fs[1]]) < cos_lim:
                self.features.add(e)
        self._retype()

    def _retype(self):
        count = [0] * len(self.V)
        for a, b in self.features:
            count[a] += 1
            count[b] += 1
        self.vtype = [SMOOTH if c == 0 else (CREASE if c == 2 else CORNER) for c in count]

    # -- topology helpers
    def neighbors(self, v):
        out = set()
        for f in self.vf[v]:
            out.update(self.F[f])
        out.discard(v)
        return out

    def edge_faces(self, a, b):
        return [f for f in self.vf[a] if b in self.F[f]]

    def edges(self):
        es = set()
        for i, f in enumerate(self.F):
            if self.alive[i]:
                for k in range(3):
                    es.add(_ekey(f[k], f[(k + 1) % 3]))
        return es

    def length(self, a, b):
        return float(np.linalg.norm(self.V[a] - self.V[b]))

    def face_normal(self, f, override=None):
        p = [override.get(v, self.V[v]) if override else self.V[v] for v in self.F[f]]
        return np.cross(p[1] - p[0], p[2] - p[0])

    # -- operations
    def split(self, a, b):
        fs = self.edge_faces(a, b)
        if len(fs) != 2:
            return False
        m = len(self.V)
        self.V.append(0.5 * (self.V[a] + self.V[b]))
        self.vf.append(set())
        feat = _ekey(a, b) in self.features
        self.vtype.append(CREASE if feat else SMOOTH)
        for f in fs:
            tri = self.F[f]
            k = next(i for i in range(3) if {tri[i], tri[(i + 1) % 3]} == {a, b})
            x, y, z = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            self.F[f] = [x, m, z]
            nf = len(self.F)
            self.F.append([m, y, z])
            self.alive.append(True)
            self.vf[y].discard(f)
            self.vf[y].add(nf)
            self.vf[z].add(nf)
            self.vf[m].update((f, nf))
        if feat:
            self.features.discard(_ekey(a, b))
            self.features.add(_ekey(a, m))
            self.features.add(_ekey(m, b))
        return True

    def collapse(self, a, b, high):
        fs = self.edge_faces(a, b)
        if len(fs) != 2:
            return False
        ta, tb = self.vtype[a], self.vtype[b]
        feat = _ekey(a, b) in self.features
        if feat:
            if ta == CORNER and tb == CORNER:
                return False
            if ta == CORNER:
                keep, drop, pos = a, b, self.V[a]
            elif tb == CORNER:
                keep, drop, pos = b, a, self.V[b]
            else:
                keep, drop, pos = a, b, 0.5 * (self.V[a] + self.V[b])
        else:
            if ta != SMOOTH and tb != SMOOTH:
                return False
            if ta != SMOOTH:
                keep, drop, pos = a, b, self.V[a]
            elif tb != SMOOTH:
                keep, drop, pos = b, a, self.V[b]
            else:
                keep, drop, pos = a, b, 0.5 * (self.V[a] + self.V[b])
        na, nb = self.neighbors(a), self.neighbors(b)
        opp = set()
        for f in fs:
            opp.update(self.F[f])
        opp -= {a, b}
        if na & nb != opp:
            return False
        for w in opp:
            if len(self.neighbors(w)) <= 3:
                return False
        for w in (na | nb) - {a, b}:
            if np.linalg.norm(pos - self.V[w]) > high:
                return False
        override = {a: pos, b: pos}
        for f in (self.vf[a] | self.vf[b]) - set(fs):
            n0 = self.face_normal(f)
            n1 = self.face_normal(f, override)
            if float(n0 @ n1) <= 1e-12 * float(n0 @ n0):
                return False
        # commit
        for f in fs:
            self.alive[f] = False
            for v in self.F[f]:
                self.vf[v].discard(f)
        for f in list(self.vf[drop]):
            self.F[f] = [keep if v == drop else v for v in self.F[f]]
            self.vf[keep].add(f)
        self.vf[drop] = set()
        self.V[keep] = np.array(pos)
        for w in list(nb if drop == b else na):
            e = _ekey(drop, w)
            if e in self.features:
                self.features.discard(e)
                if w != keep:
                    self.features.add(_ekey(keep, w))
        return True

    def flip(self, a, b):
        if _ekey(a, b) in self.features:
            return False
        fs = self.edge_faces(a, b)
        if len(fs) != 2:
            return False
        f1, f2 = fs
        t1 = self.F[f1]
        k = next(i for i in range(3) if tri_has_directed(t1, i, a, b) or tri_has_directed(t1, i, b, a))
        if t1[k] != a:  # orient so that f1 holds the directed edge a->b
            f1, f2 = f2, f1
        t1, t2 = self.F[f1], self.F[f2]
        c = next(v for v in t1 if v not in (a, b))
        d = next(v for v in t2 if v not in (a, b))
        if c == d or d in self.neighbors(c):
            return False
        va, vb = len(self.neighbors(a)), len(self.neighbors(b))
        vc, vd = len(self.neighbors(c)), len(self.neighbors(d))
        if va <= 3 or vb <= 3:
            return False
        before = abs(va - 6) + abs(vb - 6) + abs(vc - 6) + abs(vd - 6)
        after = abs(va - 7) + abs(vb - 7) + abs(vc - 5) + abs(vd - 5)
        if after >= before:
            return False
        old = self.face_normal(f1) + self.face_normal(f2)
        new1 = np.cross(self.V[d] - self.V[a], self.V[c] - self.V[a])
        new2 = np.cross(self.V[b] - self.V[d], self.V[c] - self.V[d])
        if float(new1 @ old) <= 0 or float(new2 @ old) <= 0 or float(new1 @ new2) <= 0:
            return False
        self.F[f1] = [a, d, c]
        self.F[f2] = [d, b, c]
        self.vf[b].discard(f1)
        self.vf[a].discard(f2)
        self.vf[d].add(f1)
        self.vf[c].add(f2)
        return True

    def relax(self):
        nv = len(self.V)
        vn = np.zeros((nv, 3))
        for i, f in enumerate(self.F):
            if self.alive[i]:
                n = self.face_normal(i)
                for v in f:
                    vn[v] += n
        moved, targets = [], []
        crease_nb = {}
        for a, b in self.features:
            crease_nb.setdefault(a, []).append(b)
            crease_nb.setdefault(b, []).append(a)
        for v in range(nv):
            if not self.vf[v] or self.vtype[v] == CORNER:
                continue
            p = self.V[v]
            if self.vtype[v] == CREASE:
                u, w = crease_nb[v]
                axis = self.V[w] - self.V[u]
                ln = np.linalg.norm(axis)
                if ln == 0:
                    continue
                axis /= ln
                q = 0.5 * (self.V[u] + self.V[w])
                target = p + axis * float(axis @ (q - p))
            else:
                # area-weighted centroid of the incident faces
                tri = np.array([[self.V[w] for w in self.F[f]] for f in self.vf[v]])
                area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
                if area.sum() == 0:
                    continue
                q = (area[:, None] * tri.mean(axis=1)).sum(axis=0) / area.sum()
                n = vn[v]
                ln = np.linalg.norm(n)
                if ln == 0:
                    continue
                n = n / ln
                target = q + n * float(n @ (p - q))
            moved.append(v)
            targets.append(target)
        if not moved:
            return
        proj, _, _ = closest_points(self.src, np.array(targets))
        for v, p in zip(moved, proj):
            self.V[v] = p

    def to_mesh(self) -> TriMesh:
        used = sorted({v for i, f in enumerate(self.F) if self.alive[i] for v in f})
        remap = {v: i for i, v in enumerate(used)}
        V = np.array([self.V[v] for v in used])
        F = np.array([[remap[v] for v in f] for i, f in enumerate(self.F) if self.alive[i]])
        return TriMesh(V, F)


def tri_has_directed(tri, i, a, b):
    return tri[i] == a and tri[(i + 1) % 3] == b


def isotropic_remesh(mesh: TriMesh, target_edge_length: float, iterations: int = 5,
                     feature_angle: float = 45.0) -> TriMesh:
    """Remesh toward uniform edge length ``target_edge_length`` (meters)."""
    if not target_edge_length > 0:
        raise ValueError("target edge length must be positive")
    if target_edge_length > mesh.diagonal:
        raise MeshError("target edge length exceeds the bounding-box diagonal")
    if not mesh.is_watertight():
        raise MeshError("isotropic_remesh requires a watertight mesh")
    r = _Remesher(mesh, feature_angle)
    high = 4.0 / 3.0 * target_edge_length
    low = 4.0 / 5.0 * target_edge_length
    for _ in range(iterations):
        # splits until no long edge remains (bounded to keep pathological inputs finite)
        for _pass in range(64):
            long_edges = [(r.length(a, b), a, b) for a, b in r.edges() if r.length(a, b) > high]
            if not long_edges:
                break
            for _, a, b in sorted(long_edges, reverse=True):
                if r.length(a, b) > high:
                    r.split(a, b)
        short = sorted((r.length(a, b), a, b) for a, b in r.edges() if r.length(a, b) < low)
        for _, a, b in short:
            if r.vf[a] and r.vf[b] and r.length(a, b) < low:
                r.collapse(a, b, high)
        for a, b in sorted(r.edges()):
            r.flip(a, b)
        r.relax()
    out = r.to_mesh()
    if not out.is_watertight():
        raise MeshError("remeshing produced a non-watertight surface")
    return out
