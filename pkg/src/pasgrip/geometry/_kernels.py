"""Numba kernels for triangle-mesh queries.

All kernels take the packed mesh tuple produced by ``TriMesh.kernel_data``:
``(v0, e1, e2, nrm, bmin, bmax, left, right, start, count, order)``.
Triangle ``f`` is ``v0[f], v0[f] + e1[f], v0[f] + e2[f]`` with unit normal
``nrm[f]``; the BVH nodes are flattened with ``left == -1`` marking leaves.
"""

import numpy as np
from numba import njit, prange

BARY_EPS = 1e-12
MERGE_TOL = 1e-9
# generic direction for containment rays; avoids grid/axis-aligned degeneracies
RAY_DIR = np.array([0.2764352315, 0.5430871292, 0.7929418517])
RAY_DIR = RAY_DIR / np.sqrt((RAY_DIR ** 2).sum())
RAY_FAR = 1e6
HIT_CAP = 512
PAIR_CAP = 32


@njit(cache=True, inline="always")
def _dot(a0, a1, a2, b0, b1, b2):
    return a0 * b0 + a1 * b1 + a2 * b2


@njit(cache=True)
def _ray_box(o, d, tlo, thi, bmin, bmax, node):
    for ax in range(3):
        lo = bmin[node, ax]
        hi = bmax[node, ax]
        if d[ax] == 0.0:
            if o[ax] < lo or o[ax] > hi:
                return False
            continue
        inv = 1.0 / d[ax]
        t1 = (lo - o[ax]) * inv
        t2 = (hi - o[ax]) * inv
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tlo:
            tlo = t1
        if t2 < thi:
            thi = t2
        if tlo > thi:
            return False
    return True


@njit(cache=True)
def collect_hits(o, d, tlo, thi, mesh, out_t, out_s, out_f, n):
    """Append every triangle crossing of ``o + t d`` with t in [tlo, thi].

    Crossings with ``d . normal == 0`` are ignored (grazing). Returns the new
    fill count; hits beyond the buffer capacity are dropped.
    """
    v0, e1, e2, nrm, bmin, bmax, left, right, start, count, order = mesh
    cap = out_t.shape[0]
    stack = np.empty(128, np.int64)
    sp = 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _ray_box(o, d, tlo - 1e-12, thi + 1e-12, bmin, bmax, node):
            continue
        if left[node] >= 0:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
            continue
        for k in range(start[node], start[node] + count[node]):
            f = order[k]
            dn = _dot(d[0], d[1], d[2], nrm[f, 0], nrm[f, 1], nrm[f, 2])
            if dn == 0.0:
                continue
            # Moller-Trumbore
            a0 = e1[f, 0]; a1 = e1[f, 1]; a2 = e1[f, 2]
            b0 = e2[f, 0]; b1 = e2[f, 1]; b2 = e2[f, 2]
            p0 = d[1] * b2 - d[2] * b1
            p1 = d[2] * b0 - d[0] * b2
            p2 = d[0] * b1 - d[1] * b0
            det = a0 * p0 + a1 * p1 + a2 * p2
            if det == 0.0:
                continue
            inv = 1.0 / det
            s0 = o[0] - v0[f, 0]; s1 = o[1] - v0[f, 1]; s2 = o[2] - v0[f, 2]
            u = (s0 * p0 + s1 * p1 + s2 * p2) * inv
            if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                continue
            q0 = s1 * a2 - s2 * a1
            q1 = s2 * a0 - s0 * a2
            q2 = s0 * a1 - s1 * a0
            v = (d[0] * q0 + d[1] * q1 + d[2] * q2) * inv
            if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                continue
            t = (b0 * q0 + b1 * q1 + b2 * q2) * inv
            if t < tlo or t > thi:
                continue
            if n < cap:
                out_t[n] = t
                out_s[n] = 1 if dn > 0.0 else -1
                out_f[n] = f
            n += 1
    return n


@njit(cache=True)
def _cluster_signs(ts, ss, n, tol, out_pos, out_sign, out_mixed):
    """Sort hits by parameter and merge runs closer than ``tol``.

    Writes one entry per cluster: position of the first hit, the common sign
    (or the clamped net sign for mixed clusters), and a mixed flag.
    Returns the number of clusters.
    """
    if n == 0:
        return 0
    idx = np.argsort(ts[:n])
    nc = 0
    i = 0
    while i < n:
        j = i
        t0 = ts[idx[i]]
        net = 0
        first = ss[idx[i]]
        mixed = False
        while j < n and ts[idx[j]] - ts[idx[j - 1 if j > i else j]] <= tol:
            sj = ss[idx[j]]
            net += sj
            if sj != first:
                mixed = True
            j += 1
        out_pos[nc] = t0
        if mixed:
            out_sign[nc] = 1 if net > 0 else (-1 if net < 0 else 0)
        else:
            out_sign[nc] = first
        out_mixed[nc] = mixed
        nc += 1
        i = j
    return nc


@njit(cache=True)
def point_inside_one(p, mesh):
    """Containment by signed crossing count along a fixed generic ray."""
    bmin = mesh[4]
    bmax = mesh[5]
    for ax in range(3):
        if p[ax] < bmin[0, ax] or p[ax] > bmax[0, ax]:
            return False
    ts = np.empty(HIT_CAP)
    ss = np.empty(HIT_CAP, np.int64)
    fs = np.empty(HIT_CAP, np.int64)
    d = RAY_DIR.copy()
    n = collect_hits(p, d, 0.0, RAY_FAR, mesh, ts, ss, fs, 0)
    n = min(n, HIT_CAP)
    # drop crossings at the origin itself (boundary point); t > 0 only
    m = 0
    for i in range(n):
        if ts[i] > 0.0:
            ts[m] = ts[i]
            ss[m] = ss[i]
            m += 1
    pos = np.empty(m + 1)
    sg = np.empty(m + 1, np.int64)
    mx = np.empty(m + 1, np.bool_)
    nc = _cluster_signs(ts, ss, m, MERGE_TOL, pos, sg, mx)
    total = 0
    for c in range(nc):
        total += sg[c]
    return total > 0


@njit(cache=True, parallel=True)
def points_inside(points, mesh):
    out = np.zeros(points.shape[0], np.bool_)
    for i in prange(points.shape[0]):
        out[i] = point_inside_one(points[i], mesh)
    return out


@njit(cache=True)
def segment_hits(p0, p1, mesh):
    """Clustered crossings of segment p0->p1.

    Returns (t, sign, mixed) arrays for clusters sorted by t. Mixed clusters
    carry the clamped net sign and are flagged for resolution by the caller.
    """
    d = p1 - p0
    ts = np.empty(HIT_CAP)
    ss = np.empty(HIT_CAP, np.int64)
    fs = np.empty(HIT_CAP, np.int64)
    n = collect_hits(p0, d, 0.0, 1.0, mesh, ts, ss, fs, 0)
    n = min(n, HIT_CAP)
    L = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
    tol = MERGE_TOL / L if L > 0 else MERGE_TOL
    pos = np.empty(n + 1)
    sg = np.empty(n + 1, np.int64)
    mx = np.empty(n + 1, np.bool_)
    nc = _cluster_signs(ts, ss, n, tol, pos, sg, mx)
    return pos[:nc].copy(), sg[:nc].copy(), mx[:nc].copy()


@njit(cache=True)
def _point_at(points, cum, nseg, s):
    # point at arc length s along a polyline
    k = 0
    while k < nseg - 1 and cum[k + 1] < s:
        k += 1
    a = points[k]
    b = points[k + 1]
    seg = cum[k + 1] - cum[k]
    if seg <= 0.0:
        return a.copy()
    t = (s - cum[k]) / seg
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return a + t * (b - a)


@njit(cache=True)
def polyline_crossings(points, mesh, out_pos, out_sign):
    """Resolved entering(-1)/exiting(+1) crossings along a polyline.

    Positions are arc lengths. Returns (n_crossings, total_length,
    start_inside). Falls back to midpoint containment whenever clustering
    leaves a mixed cluster or the signs fail to alternate.
    """
    npts = points.shape[0]
    nseg = npts - 1
    cum = np.zeros(npts)
    for k in range(nseg):
        dx = points[k + 1, 0] - points[k, 0]
        dy = points[k + 1, 1] - points[k, 1]
        dz = points[k + 1, 2] - points[k, 2]
        cum[k + 1] = cum[k] + np.sqrt(dx * dx + dy * dy + dz * dz)
    total = cum[nseg]
    ts = np.empty(HIT_CAP)
    ss = np.empty(HIT_CAP, np.int64)
    fs = np.empty(HIT_CAP, np.int64)
    n = 0
    for k in range(nseg):
        seg = cum[k + 1] - cum[k]
        if seg <= 0.0:
            continue
        d = points[k + 1] - points[k]
        n0 = n
        n = collect_hits(points[k], d, 0.0, 1.0, mesh, ts, ss, fs, n)
        if n > HIT_CAP:
            n = HIT_CAP
        for i in range(n0, n):
            ts[i] = cum[k] + ts[i] * seg
    pos = np.empty(n + 1)
    sg = np.empty(n + 1, np.int64)
    mx = np.empty(n + 1, np.bool_)
    nc = _cluster_signs(ts, ss, n, MERGE_TOL, pos, sg, mx)
    if nc == 0:
        mid = _point_at(points, cum, nseg, 0.5 * total)
        return 0, total, point_inside_one(mid, mesh)
    ok = True
    for c in range(nc):
        if mx[c] or sg[c] == 0:
            ok = False
            break
        if c > 0 and sg[c] == sg[c - 1]:
            ok = False
            break
    if ok:
        for c in range(nc):
            out_pos[c] = pos[c]
            out_sign[c] = sg[c]
        return nc, total, sg[0] == 1
    # slow path: containment at midpoints between cluster positions
    inside_prev = point_inside_one(_point_at(points, cum, nseg, 0.5 * pos[0]), mesh)
    start_inside = inside_prev
    m = 0
    for c in range(nc):
        nxt = pos[c + 1] if c + 1 < nc else total
        inside_next = point_inside_one(_point_at(points, cum, nseg, 0.5 * (pos[c] + nxt)), mesh)
        if inside_next != inside_prev:
            out_pos[m] = pos[c]
            out_sign[m] = -1 if inside_next else 1
            m += 1
        inside_prev = inside_next
    return m, total, start_inside


@njit(cache=True)
def _polyline_eval(points, mesh, pairs, pair_slot):
    """Inside length and entry/exit pairs of one polyline."""
    pos = np.empty(HIT_CAP + 1)
    sg = np.empty(HIT_CAP + 1, np.int64)
    nc, total, start_inside = polyline_crossings(points, mesh, pos, sg)
    npts = points.shape[0]
    nseg = npts - 1
    cum = np.zeros(npts)
    for k in range(nseg):
        cum[k + 1] = cum[k] + np.sqrt(((points[k + 1] - points[k]) ** 2).sum())
    if nc == 0:
        return (total if start_inside else 0.0), 0
    inside = 0.0
    state = start_inside
    last = 0.0
    npair = 0
    have_entry = False
    entry = np.zeros(3)
    for c in range(nc):
        if state:
            inside += pos[c] - last
        last = pos[c]
        p = _point_at(points, cum, nseg, pos[c])
        if sg[c] == -1:
            state = True
            have_entry = True
            entry = p
        else:
            state = False
            if have_entry:
                if npair < pairs.shape[1]:
                    pairs[pair_slot, npair, 0] = entry
                    pairs[pair_slot, npair, 1] = p
                npair += 1
                have_entry = False
    if state:
        inside += total - last
    return inside, npair


@njit(cache=True, parallel=True)
def batch_polyline_eval(points, offsets, mesh):
    """Evaluate many polylines packed CSR-style (``offsets`` has L+1 entries).

    Returns inside lengths (L,), pair counts (L,), and pair endpoints
    (L, PAIR_CAP, 2, 3); counts above PAIR_CAP are reported but truncated.
    """
    L = offsets.shape[0] - 1
    inside = np.zeros(L)
    npair = np.zeros(L, np.int64)
    pairs = np.empty((L, PAIR_CAP, 2, 3))
    for i in prange(L):
        a = offsets[i]
        b = offsets[i + 1]
        if b - a < 2:
            continue
        ins, npr = _polyline_eval(points[a:b], mesh, pairs, i)
        inside[i] = ins
        npair[i] = npr
    return inside, npair, pairs


@njit(cache=True)
def _closest_on_triangle(p, a, b, c):
    # Ericson, Real-Time Collision Detection 5.1.5
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum()
    d2 = (ac * ap).sum()
    if d1 <= 0.0 and d2 <= 0.0:
        return a.copy()
    bp = p - b
    d3 = (ab * bp).sum()
    d4 = (ac * bp).sum()
    if d3 >= 0.0 and d4 <= d3:
        return b.copy()
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab
    cp = p - c
    d5 = (ab * cp).sum()
    d6 = (ac * cp).sum()
    if d6 >= 0.0 and d5 <= d6:
        return c.copy()
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b)
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w


@njit(cache=True)
def _box_dist2(p, bmin, bmax, node):
    s = 0.0
    for ax in range(3):
        if p[ax] < bmin[node, ax]:
            s += (bmin[node, ax] - p[ax]) ** 2
        elif p[ax] > bmax[node, ax]:
            s += (p[ax] - bmax[node, ax]) ** 2
    return s


@njit(cache=True)
def closest_point_one(p, mesh):
    v0, e1, e2, nrm, bmin, bmax, left, right, start, count, order = mesh
    best = np.inf
    best_f = -1
    best_q = np.zeros(3)
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _box_dist2(p, bmin, bmax, node) >= best:
            continue
        if left[node] >= 0:
            dl = _box_dist2(p, bmin, bmax, left[node])
            dr = _box_dist2(p, bmin, bmax, right[node])
            # push the farther child first so the nearer is visited first
            if dl < dr:
                stack[sp] = right[node]
                stack[sp + 1] = left[node]
            else:
                stack[sp] = left[node]
                stack[sp + 1] = right[node]
            sp += 2
            continue
        for k in range(start[node], start[node] + count[node]):
            f = order[k]
            a = v0[f]
            q = _closest_on_triangle(p, a, a + e1[f], a + e2[f])
            d2 = ((q - p) ** 2).sum()
            if d2 < best:
                best = d2
                best_f = f
                best_q = q
    return best_q, np.sqrt(best), best_f


@njit(cache=True, parallel=True)
def closest_points(points, mesh):
    n = points.shape[0]
    q = np.empty((n, 3))
    dist = np.empty(n)
    face = np.empty(n, np.int64)
    for i in prange(n):
        qi, di, fi = closest_point_one(points[i], mesh)
        q[i] = qi
        dist[i] = di
        face[i] = fi
    return q, dist, face


@njit(cache=True, parallel=True)
def winding_numbers(points, tris):
    """Generalized winding number (solid angle / 4 pi), brute force.

    ``tris`` is (F, 3, 3). Independent of the BVH/ray machinery on purpose.
    """
    n = points.shape[0]
    out = np.zeros(n)
    for i in prange(n):
        p = points[i]
        w = 0.0
        for f in range(tris.shape[0]):
            a = tris[f, 0] - p
            b = tris[f, 1] - p
            c = tris[f, 2] - p
            la = np.sqrt((a * a).sum())
            lb = np.sqrt((b * b).sum())
            lc = np.sqrt((c * c).sum())
            det = (a[0] * (b[1] * c[2] - b[2] * c[1])
                   - a[1] * (b[0] * c[2] - b[2] * c[0])
                   + a[2] * (b[0] * c[1] - b[1] * c[0]))
            den = (la * lb * lc + (a * b).sum() * lc + (b * c).sum() * la
                   + (c * a).sum() * lb)
            w += 2.0 * np.arctan2(det, den)
        out[i] = w / (4.0 * np.pi)
    return out


@njit(cache=True, parallel=True)
def segments_hit_count(p0s, p1s, mesh):
    """Raw triangle-crossing count for each segment p0s[i] -> p1s[i]."""
    m = p0s.shape[0]
    out = np.zeros(m, np.int64)
    for i in prange(m):
        ts = np.empty(HIT_CAP)
        ss = np.empty(HIT_CAP, np.int64)
        fs = np.empty(HIT_CAP, np.int64)
        d = p1s[i] - p0s[i]
        out[i] = collect_hits(p0s[i], d, 0.0, 1.0, mesh, ts, ss, fs, 0)
    return out
