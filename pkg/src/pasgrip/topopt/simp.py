"""Volume-constrained compliance minimization (SIMP) on unit hexahedra.

Linear elasticity with trilinear 8-node elements, a linear density filter,
and optimality-criteria updates. Only elements inside ``mask`` exist; the
rest of the grid is treated as empty space.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, spsolve

log = logging.getLogger(__name__)

E_MIN = 1e-9
E_MAX = 1.0
NU = 0.3
PENAL = 3.0
FILTER_RADIUS = 1.5
MOVE = 0.2
DIRECT_SOLVE_MAX_DOFS = 3000

# node order: (i, j, k) corner offsets of the unit cube
CORNERS = np.array(list(itertools.product((0, 1), repeat=3)))


@lru_cache(maxsize=None)
def hex8_stiffness(nu: float = NU) -> np.ndarray:
    """24x24 stiffness of a unit cube element with E = 1 (2x2x2 Gauss rule)."""
    lam = nu / ((1 + nu) * (1 - 2 * nu))
    mu = 1.0 / (2 * (1 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[:3, :3] += 2 * mu * np.eye(3)
    D[3:, 3:] = mu * np.eye(3)
    sgn = 2 * CORNERS - 1  # corner coordinates in [-1, 1]
    g = 1 / np.sqrt(3)
    KE = np.zeros((24, 24))
    for xi in itertools.product((-g, g), repeat=3):
        xi = np.array(xi)
        # shape-function derivatives w.r.t. natural coords, then physical (x = (xi+1)/2)
        dN = np.empty((8, 3))
        for a in range(8):
            s = sgn[a]
            f = 1 + s * xi
            dN[a] = 0.125 * s * np.array([f[1] * f[2], f[0] * f[2], f[0] * f[1]])
        dN *= 2.0
        B = np.zeros((6, 24))
        for a in range(8):
            bx, by, bz = dN[a]
            B[0, 3 * a] = bx
            B[1, 3 * a + 1] = by
            B[2, 3 * a + 2] = bz
            B[3, 3 * a] = by
            B[3, 3 * a + 1] = bx
            B[4, 3 * a + 1] = bz
            B[4, 3 * a + 2] = by
            B[5, 3 * a] = bz
            B[5, 3 * a + 2] = bx
        KE += B.T @ D @ B * 0.125  # Jacobian determinant of the unit cube
    return KE


@dataclass
class SimpResult:
    density: np.ndarray  # full grid, zeros outside the mask
    compliance_history: list = field(default_factory=list)
    volume_history: list = field(default_factory=list)


class HexModel:
    """FE assembly for the masked elements of a grid."""

    def __init__(self, mask: np.ndarray):
        self.mask = np.asarray(mask, dtype=bool)
        self.cells = np.argwhere(self.mask)
        dims = np.array(self.mask.shape) + 1
        node_ijk = self.cells[:, None, :] + CORNERS[None]  # (ne, 8, 3)
        gid = np.ravel_multi_index(node_ijk.reshape(-1, 3).T, dims).reshape(-1, 8)
        used, local = np.unique(gid, return_inverse=True)
        self.node_ids = used
        self.n_nodes = len(used)
        self.conn = local.reshape(-1, 8)
        self.edof = (3 * self.conn[:, :, None] + np.arange(3)).reshape(-1, 24)
        self.KE = hex8_stiffness()
        self._rows = np.repeat(self.edof, 24, axis=1).ravel()
        self._cols = np.tile(self.edof, (1, 24)).ravel()
        self.grid_dims = dims
        self.node_xyz = np.stack(np.unravel_index(used, dims), axis=1).astype(float)
        self._u_prev = None

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_nodes

    def element_nodes(self, cell_ijk):
        """Local node ids of the element at grid cell ``cell_ijk``."""
        gid = np.ravel_multi_index((np.asarray(cell_ijk) + CORNERS).T, self.grid_dims)
        return np.searchsorted(self.node_ids, gid)

    def stiffness(self, young: np.ndarray):
        vals = (young[:, None, None] * self.KE[None]).ravel()
        K = sp.coo_matrix((vals, (self._rows, self._cols)), shape=(self.n_dofs,) * 2).tocsr()
        return K

    def rigid_modes(self) -> np.ndarray:
        """Near-nullspace of elasticity (3 translations, 3 rotations), (n_dofs, 6)."""
        x, y, z = (self.node_xyz - self.node_xyz.mean(axis=0)).T
        B = np.zeros((self.n_nodes, 3, 6))
        B[:, 0, 0] = B[:, 1, 1] = B[:, 2, 2] = 1.0
        B[:, 0, 3], B[:, 1, 3] = -y, x
        B[:, 1, 4], B[:, 2, 4] = -z, y
        B[:, 0, 5], B[:, 2, 5] = z, -x
        return B.reshape(-1, 6)

    def solve(self, young, f, fixed_dofs):
        K = self.stiffness(young)
        free = np.setdiff1d(np.arange(self.n_dofs), fixed_dofs)
        Kf = K[free][:, free]
        u = np.zeros(self.n_dofs)
        if len(free) <= DIRECT_SOLVE_MAX_DOFS:
            u[free] = spsolve(Kf.tocsc(), f[free])
        else:
            import pyamg

            # the hierarchy is rebuilt every solve: once densities turn binary a
            # preconditioner from an earlier iteration costs ~10x more CG steps
            Kf = Kf.tocsr()
            # setup draws start vectors from the global numpy RNG; pin it so reruns match bit for bit
            state = np.random.get_state()
            np.random.seed(0)
            try:
                ml = pyamg.smoothed_aggregation_solver(Kf, B=self.rigid_modes()[free], symmetry="symmetric")
            finally:
                np.random.set_state(state)
            x0 = None if self._u_prev is None else self._u_prev[free]
            sol, info = cg(Kf, f[free], x0=x0, rtol=1e-8, atol=0.0, M=ml.aspreconditioner(cycle="V"),
                           maxiter=2000)
            if info != 0:
                log.warning("stage=topopt cg_info=%d", info)
            u[free] = sol
        self._u_prev = u
        return u


def density_filter(cells: np.ndarray, radius: float = FILTER_RADIUS):
    """Row-normalized linear-hat filter over the listed cells."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    n = len(cells)
    r = int(np.ceil(radius)) - 1 if radius == int(radius) else int(np.floor(radius))
    lo = cells.min(axis=0) - r if n else np.zeros(3, dtype=np.int64)
    shape = (cells.max(axis=0) + r + 1 - lo) if n else np.ones(3, dtype=np.int64)
    lookup = np.full(tuple(shape), -1, dtype=np.int64)
    lookup[tuple((cells - lo).T)] = np.arange(n)
    rows, cols, vals = [], [], []
    for o in itertools.product(range(-r, r + 1), repeat=3):
        w = radius - np.linalg.norm(o)
        if w <= 0:
            continue
        j = lookup[tuple((cells + o - lo).T)]
        hit = j >= 0
        rows.append(np.nonzero(hit)[0])
        cols.append(j[hit])
        vals.append(np.full(int(hit.sum()), w))
    H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    Hs = np.asarray(H.sum(axis=1)).ravel()
    return H, Hs


def simp_optimize(mask, fixed_cells, load_cells, load_forces, volume_fraction: float = 0.1,
                  penal: float = PENAL, iters: int = 60, filter_radius: float = FILTER_RADIUS,
                  move: float = MOVE, solid_cells=None) -> SimpResult:
    """Minimize compliance subject to mean design density == volume_fraction.

    ``load_forces[i]`` is split evenly over the 8 nodes of ``load_cells[i]``;
    all nodes of the fixed cells are clamped. ``solid_cells`` are held at
    density 1 and left out of the volume budget (e.g. a mount block).
    """
    mask = np.asarray(mask, dtype=bool)
    if not 0 < volume_fraction <= 1:
        raise ValueError("volume fraction must lie in (0, 1]")
    fixed_cells = np.asarray(fixed_cells).reshape(-1, 3)
    load_cells = np.asarray(load_cells).reshape(-1, 3)
    if len(fixed_cells) == 0:
        raise ValueError("at least one fixed cell is required")
    for c in np.vstack([fixed_cells, load_cells]):
        if not mask[tuple(c)]:
            raise ValueError(f"boundary cell {tuple(c)} lies outside the design domain")
    from scipy import ndimage

    lab, _ = ndimage.label(mask, structure=ndimage.generate_binary_structure(3, 1))
    comps = {lab[tuple(c)] for c in np.vstack([fixed_cells, load_cells])}
    if len(comps) != 1:
        raise ValueError("fixed and loaded cells are not connected through the design domain")
    model = HexModel(mask)
    f = np.zeros(model.n_dofs)
    for c, F in zip(load_cells, np.asarray(load_forces, dtype=float).reshape(-1, 3)):
        nodes = model.element_nodes(c)
        for a in range(3):
            np.add.at(f, 3 * nodes + a, F[a] / 8.0)
    fixed_nodes = np.unique(np.concatenate([model.element_nodes(c) for c in fixed_cells]))
    fixed_dofs = (3 * fixed_nodes[:, None] + np.arange(3)).ravel()
    H, Hs = density_filter(model.cells, filter_radius)
    ne = len(model.cells)
    solid = np.zeros(ne, dtype=bool)
    if solid_cells is not None and len(solid_cells):
        sel = np.zeros(mask.shape, dtype=bool)
        sel[tuple(np.asarray(solid_cells).reshape(-1, 3).T)] = True
        solid = sel[tuple(model.cells.T)]
    active = ~solid
    if not active.any():
        raise ValueError("no design cells left outside the solid region")
    x = np.full(ne, float(volume_fraction))
    x[solid] = 1.0
    phys = x.copy()
    result = SimpResult(np.zeros(mask.shape))
    for it in range(iters):
        young = E_MIN + phys ** penal * (E_MAX - E_MIN)
        u = model.solve(young, f, fixed_dofs)
        ue = u[model.edof]
        ce = np.einsum("ei,ij,ej->e", ue, model.KE, ue)
        c = float((young * ce).sum())
        dc = -penal * phys ** (penal - 1) * (E_MAX - E_MIN) * ce
        dv = np.ones(ne)
        dc = H.T @ (dc / Hs)
        dv = H.T @ (dv / Hs)
        result.compliance_history.append(c)
        result.volume_history.append(float(phys[active].mean()))
        l1, l2 = 0.0, 1e9
        scale = np.sqrt(np.maximum(-dc, 0.0) / dv)
        while (l2 - l1) / (l1 + l2) > 1e-9:
            lm = 0.5 * (l1 + l2)
            xn = np.clip(x * scale / np.sqrt(lm), np.maximum(0.0, x - move), np.minimum(1.0, x + move))
            xn[solid] = 1.0
            if (H @ xn / Hs)[active].mean() > volume_fraction:
                l1 = lm
            else:
                l2 = lm
        change = float(np.abs(xn - x).max())
        x = xn
        phys = H @ x / Hs
        phys[solid] = 1.0
        log.debug("stage=topopt iter=%d compliance=%.6g volume=%.4f change=%.4f", it, c, phys[active].mean(),
                  change)
    young = E_MIN + phys ** penal * (E_MAX - E_MIN)
    u = model.solve(young, f, fixed_dofs)
    result.final_compliance = float(f @ u)
    result.density[tuple(model.cells.T)] = phys
    return result


def compliance(mask, density_cells, fixed_cells, load_cells, load_forces, penal: float = PENAL) -> float:
    """Compliance f.u of a given density field (masked cells, C order)."""
    mask = np.asarray(mask, dtype=bool)
    model = HexModel(mask)
    f = np.zeros(model.n_dofs)
    for c, F in zip(np.asarray(load_cells).reshape(-1, 3), np.asarray(load_forces, dtype=float).reshape(-1, 3)):
        nodes = model.element_nodes(c)
        for a in range(3):
            np.add.at(f, 3 * nodes + a, F[a] / 8.0)
    fixed_nodes = np.unique(np.concatenate([model.element_nodes(c) for c in np.asarray(fixed_cells).reshape(-1, 3)]))
    fixed_dofs = (3 * fixed_nodes[:, None] + np.arange(3)).ravel()
    rho = np.asarray(density_cells, dtype=float)
    young = E_MIN + rho ** penal * (E_MAX - E_MIN)
    u = model.solve(young, f, fixed_dofs)
    return float(f @ u)
