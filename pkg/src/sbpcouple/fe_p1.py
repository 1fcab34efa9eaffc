"""Continuous P1 finite elements on triangulated rectangles.

All matrices are exact for products of linear basis functions. Nodal
weights (viscosity, flux weights, boundary data) enter through their
piecewise linear interpolant, except for weighted boundary masses where the
edge rule ``(phi_i + phi_j)/2 * (R_M)_ij`` is used so that the weighted
boundary mass is ``(R_M Phi + Phi R_M)/2`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

SIDES = ("N", "E", "S", "W")
_NORMALS = {"N": (0.0, 1.0), "E": (1.0, 0.0), "S": (0.0, -1.0), "W": (-1.0, 0.0)}


class MeshError(ValueError):
    """Raised for malformed or invalid triangulations."""


@dataclass
class Triangulation:
    nodes: np.ndarray          # (N, 2)
    triangles: np.ndarray      # (T, 3), counterclockwise
    bedges: np.ndarray         # (E, 2)
    btags: list                # side label per boundary edge

    @property
    def n_dof(self) -> int:
        return len(self.nodes)

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def bounding_rect(self):
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return (lo[0], hi[0], lo[1], hi[1])

    def max_diameter(self) -> float:
        p = self.nodes[self.triangles]
        d = [np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in ((0, 1), (1, 2), (2, 0))]
        return float(np.max(d))

    def side_nodes(self, side: str) -> np.ndarray:
        """Nodes on one side, ordered by ascending coordinate along it."""
        sel = [e for e, t in zip(self.bedges, self.btags) if t == side]
        if not sel:
            raise MeshError(f"no boundary edges tagged {side}")
        idx = np.unique(np.asarray(sel).ravel())
        axis = 1 if side in ("W", "E") else 0
        return idx[np.argsort(self.nodes[idx, axis], kind="stable")]


def generate_regular_mesh(rect, nx: int, ny: int) -> Triangulation:
    """Structured mesh with every cell split along its rising diagonal.

    Node ``(i, j)`` (x index ``i``, y index ``j``) has number ``i * ny + j``.
    """
    x_l, x_r, y_l, y_r = map(float, rect)
    if not (x_r > x_l and y_r > y_l):
        raise MeshError(f"degenerate rectangle {rect}")
    if nx < 2 or ny < 2:
        raise MeshError("need at least two points per direction")
    X, Y = np.meshgrid(np.linspace(x_l, x_r, nx), np.linspace(y_l, y_r, ny), indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def k(i, j):
        return i * ny + j

    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, d = k(i, j), k(i + 1, j), k(i + 1, j + 1), k(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    edges, tags = [], []
    for i in range(nx - 1):
        edges.append((k(i, 0), k(i + 1, 0)))
        tags.append("S")
        edges.append((k(i + 1, ny - 1), k(i, ny - 1)))
        tags.append("N")
    for j in range(ny - 1):
        edges.append((k(nx - 1, j), k(nx - 1, j + 1)))
        tags.append("E")
        edges.append((k(0, j + 1), k(0, j)))
        tags.append("W")
    return Triangulation(nodes, np.asarray(tris, dtype=int), np.asarray(edges, dtype=int), tags)


def validate_mesh(mesh: Triangulation) -> None:
    n = mesh.n_dof
    if mesh.triangles.size and (mesh.triangles.min() < 0 or mesh.triangles.max() >= n):
        bad = int(np.nonzero((mesh.triangles < 0).any(1) | (mesh.triangles >= n).any(1))[0][0])
        raise MeshError(f"triangle {bad} references a node out of range")
    areas = mesh.areas()
    if np.any(areas <= 0):
        bad = int(np.nonzero(areas <= 0)[0][0])
        raise MeshError(f"triangle {bad} is not counterclockwise (signed area {areas[bad]:.3g})")
    owner = _edge_owners(mesh.triangles)
    for k, (e, tag) in enumerate(zip(mesh.bedges, mesh.btags)):
        if tag not in SIDES:
            raise MeshError(f"boundary edge {k} has bad tag {tag!r}")
        if e.min() < 0 or e.max() >= n:
            raise MeshError(f"boundary edge {k} references a node out of range")
        key = (min(e), max(e))
        if len(owner.get(key, ())) != 1:
            raise MeshError(f"boundary edge {k} ({e[0]}, {e[1]}) does not belong to exactly one triangle")
    # every edge owned by a single triangle must be tagged
    tagged = {(min(e), max(e)) for e in mesh.bedges}
    for key, tri in owner.items():
        if len(tri) == 1 and key not in tagged:
            raise MeshError(f"untagged boundary edge {key} of triangle {tri[0]}")
    degree = np.bincount(mesh.bedges.ravel(), minlength=n) if len(mesh.bedges) else np.zeros(n)
    if np.any((degree != 0) & (degree != 2)):
        bad = int(np.nonzero((degree != 0) & (degree != 2))[0][0])
        raise MeshError(f"boundary edges do not form closed chains at node {bad}")


def _edge_owners(triangles):
    owner = {}
    for t, tri in enumerate(triangles):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            owner.setdefault(key, []).append(t)
    return owner


def tag_boundary_edges(nodes, edges, rect=None):
    """Tag edges by the nearest rectangle side of their midpoint."""
    nodes = np.asarray(nodes, dtype=float)
    if rect is None:
        lo, hi = nodes.min(0), nodes.max(0)
        rect = (lo[0], hi[0], lo[1], hi[1])
    x_l, x_r, y_l, y_r = rect
    tol = 1e-9 * np.hypot(x_r - x_l, y_r - y_l)
    tags = []
    for k, (a, b) in enumerate(edges):
        mid = 0.5 * (nodes[a] + nodes[b])
        dist = {"W": abs(mid[0] - x_l), "E": abs(mid[0] - x_r),
                "S": abs(mid[1] - y_l), "N": abs(mid[1] - y_r)}
        side = min(dist, key=dist.get)
        if dist[side] > tol:
            raise MeshError(f"boundary edge {k} is not on the rectangle boundary")
        tags.append(side)
    return tags


def load_mesh(path) -> Triangulation:
    """Read the plain text mesh format (see README)."""
    with open(path) as fh:
        lines = [(no, ln.split("#", 1)[0].strip()) for no, ln in enumerate(fh, start=1)]
    lines = [(no, ln) for no, ln in lines if ln]
    if not lines:
        raise MeshError("empty mesh file")
    no, head = lines[0]
    parts = head.split()
    if len(parts) != 6 or parts[0::2] != ["nodes", "triangles", "bedges"]:
        raise MeshError(f"line {no}: expected 'nodes N triangles T bedges E'")
    try:
        nn, nt, ne = int(parts[1]), int(parts[3]), int(parts[5])
    except ValueError:
        raise MeshError(f"line {no}: counts must be integers") from None
    body = lines[1:]
    if len(body) != nn + nt + ne:
        raise MeshError(f"expected {nn + nt + ne} data lines after the header, found {len(body)}")
    nodes, tris, edges, tags = [], [], [], []
    for k, (no, ln) in enumerate(body):
        fields = ln.split()
        try:
            if k < nn:
                if len(fields) != 2:
                    raise ValueError
                nodes.append((float(fields[0]), float(fields[1])))
            elif k < nn + nt:
                if len(fields) != 3:
                    raise ValueError
                tris.append(tuple(int(f) for f in fields))
            else:
                if len(fields) != 3:
                    raise ValueError
                edges.append((int(fields[0]), int(fields[1])))
                tags.append(fields[2])
        except ValueError:
            raise MeshError(f"line {no}: cannot parse {ln!r}") from None
    mesh = Triangulation(np.asarray(nodes, dtype=float).reshape(-1, 2),
                         np.asarray(tris, dtype=int).reshape(-1, 3),
                         np.asarray(edges, dtype=int).reshape(-1, 2), tags)
    validate_mesh(mesh)
    return mesh


def save_mesh(mesh: Triangulation, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_dof} triangles {len(mesh.triangles)} bedges {len(mesh.bedges)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        for (a, b), t in zip(mesh.bedges, mesh.btags):
            fh.write(f"{a} {b} {t}\n")


def _gradients(mesh):
    """Per-triangle basis gradients, shape (T, 3, 2), and areas."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas()
    # gradient of the barycentric coordinate opposite to each vertex
    g = np.empty((len(p), 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        g[:, a, 0] = p[:, b, 1] - p[:, c, 1]
        g[:, a, 1] = p[:, c, 0] - p[:, b, 0]
    g /= (2.0 * area)[:, None, None]
    return g, area


def _scatter(mesh, local, n):
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sp.csr_matrix((local.reshape(len(tri), 9).ravel(), (rows, cols)), shape=(n, n))


def assemble_core(mesh: Triangulation, eps_nodal=0.0):
    """Mass matrix and stiffness matrix ``(eps grad phi_j, grad phi_i)``."""
    n = mesh.n_dof
    eps = np.asarray(eps_nodal, dtype=float) * np.ones(n)
    if np.any(eps < 0) or not np.all(np.isfinite(eps)):
        raise ValueError("eps must be finite and non-negative")
    g, area = _gradients(mesh)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    M = _scatter(mesh, area[:, None, None] * ref[None], n)
    eps_mean = eps[mesh.triangles].mean(axis=1)
    local = np.einsum("tad,tbd->tab", g, g) * (area * eps_mean)[:, None, None]
    # local[t, a, b] = grad phi_a . grad phi_b, symmetric, so row/col order is moot
    A = _scatter(mesh, local, n)
    return M, A


def assemble_directional(mesh: Triangulation):
    """Matrices ``(d phi_j / d x_d, phi_i)`` for d = x, y."""
    n = mesh.n_dof
    g, area = _gradients(mesh)
    out = []
    for d in range(2):
        # row i (test), column j (trial): area/3 * dphi_j/dx_d
        local = (area / 3.0)[:, None, None] * np.repeat(g[:, None, :, d], 3, axis=1)
        out.append(_scatter(mesh, local, n))
    return out


def assemble_convection(mesh: Triangulation, flux, phi_nodal, directional=None):
    """Convection matrix with the skew-symmetric flux splitting.

    ``C(phi) = sum_d (1-alpha_d) (C_d F'_d + F'_d C_d)`` with
    ``F'_d = diag(f_d'(phi))``, so ``C(phi) phi`` combines the conservative
    and the advective form of the flux derivative.
    """
    Cd = directional if directional is not None else assemble_directional(mesh)
    phi = np.asarray(phi_nodal, dtype=float) * np.ones(mesh.n_dof)
    C = sp.csr_matrix((mesh.n_dof, mesh.n_dof))
    for d in range(2):
        fp = flux.fprime(phi, d) * np.ones(mesh.n_dof)
        if not np.all(np.isfinite(fp)):
            raise ValueError("non-finite flux derivative")
        F = sp.diags(fp)
        C = C + (1.0 - flux.alpha[d]) * (Cd[d] @ F + F @ Cd[d])
    return sp.csr_matrix(C)


@dataclass
class BoundarySide:
    side: str
    nodes: np.ndarray              # ordered along the side
    coords: np.ndarray             # coordinate along the side
    R: sp.csr_matrix               # boundary mass, N x N
    R_C: sp.csr_matrix             # weak normal flux eps * n . grad, N x N
    L: sp.csr_matrix               # selection, m x N

    @property
    def normal(self):
        return _NORMALS[self.side]

    @property
    def M_I(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.L @ self.R @ self.L.T)

    def weighted(self, phi) -> sp.csr_matrix:
        """``(R Phi + Phi R)/2`` for nodal weights ``phi``."""
        P = sp.diags(np.asarray(phi, dtype=float) * np.ones(self.R.shape[0]))
        return sp.csr_matrix(0.5 * (self.R @ P + P @ self.R))

    def load(self, g_nodal) -> np.ndarray:
        """Boundary load vector ``int g phi_i`` for nodal boundary data."""
        return self.R @ g_nodal

    def axis_derivative(self) -> sp.csr_matrix:
        """``n_s M_I^{-1} L R_C`` densified on the side (derivative along
        the coordinate axis normal to the side)."""
        sign = self.normal[0] + self.normal[1]
        rhs = (self.L @ self.R_C).toarray()
        return sign * spla.splu(sp.csc_matrix(self.M_I)).solve(rhs)


def assemble_boundary(mesh: Triangulation, side: str, eps_nodal=0.0) -> BoundarySide:
    n = mesh.n_dof
    eps = np.asarray(eps_nodal, dtype=float) * np.ones(n)
    nodes = mesh.side_nodes(side)
    axis = 1 if side in ("W", "E") else 0
    coords = mesh.nodes[nodes, axis]
    L = sp.csr_matrix((np.ones(len(nodes)), (np.arange(len(nodes)), nodes)), shape=(len(nodes), n))

    owner = _edge_owners(mesh.triangles)
    g, _ = _gradients(mesh)
    normal = np.asarray(_NORMALS[side])
    rr, rc, rv = [], [], []
    cr, cc, cv = [], [], []
    for e, tag in zip(mesh.bedges, mesh.btags):
        if tag != side:
            continue
        a, b = int(e[0]), int(e[1])
        length = float(np.linalg.norm(mesh.nodes[a] - mesh.nodes[b]))
        for i, j, w in ((a, a, 2), (b, b, 2), (a, b, 1), (b, a, 1)):
            rr.append(i)
            rc.append(j)
            rv.append(length * w / 6.0)
        t = owner[(min(a, b), max(a, b))][0]
        tri = mesh.triangles[t]
        dn = g[t] @ normal            # n . grad phi for the 3 vertices
        # int_e eps_h phi_i ds for the two edge nodes
        wi = {a: length * (2 * eps[a] + eps[b]) / 6.0, b: length * (eps[a] + 2 * eps[b]) / 6.0}
        for i in (a, b):
            for loc, j in enumerate(tri):
                cr.append(i)
                cc.append(int(j))
                cv.append(dn[loc] * wi[i])
    R = sp.csr_matrix((rv, (rr, rc)), shape=(n, n))
    R_C = sp.csr_matrix((cv, (cr, cc)), shape=(n, n))
    R_C.eliminate_zeros()
    return BoundarySide(side, nodes, coords, R, R_C, L)


class MassSolver:
    """Repeated solves with an SPD mass matrix: banded Cholesky after
    reverse Cuthill-McKee reordering, sparse LU when the band stays wide."""

    def __init__(self, M):
        M = sp.csr_matrix(M)
        n = M.shape[0]
        self.perm = reverse_cuthill_mckee(M, symmetric_mode=True)
        Mp = M[self.perm][:, self.perm].tocoo()
        bw = int(np.abs(Mp.row - Mp.col).max()) if Mp.nnz else 0
        self.lu = None
        if bw > max(8, n // 8):
            self.lu = spla.splu(sp.csc_matrix(M))
            return
        upper = Mp.row <= Mp.col
        ab = np.zeros((bw + 1, n))
        ab[bw + Mp.row[upper] - Mp.col[upper], Mp.col[upper]] = Mp.data[upper]
        self.chol = sla.cholesky_banded(ab)
        self.inv = np.empty(n, dtype=int)
        self.inv[self.perm] = np.arange(n)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.lu is not None:
            return self.lu.solve(rhs)
        x = sla.cho_solve_banded((self.chol, False), rhs[self.perm], check_finite=False)
        return x[self.inv]


@dataclass
class FeBlock:
    mesh: Triangulation
    eps: np.ndarray
    M: sp.csr_matrix
    A: sp.csr_matrix
    Cd: list
    sides: dict
    kind: str = "fe"
    _solver: object = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.mesh.n_dof

    @property
    def h_max(self) -> float:
        return self.mesh.max_diameter()

    @property
    def rect(self):
        return self.mesh.bounding_rect()

    def mesh_points(self):
        return self.mesh.nodes[:, 0].copy(), self.mesh.nodes[:, 1].copy()

    def solve_mass(self, rhs):
        if self._solver is None:
            self._solver = MassSolver(self.M)
        return self._solver.solve(np.asarray(rhs))

    def convection(self, flux, phi):
        return assemble_convection(self.mesh, flux, phi, self.Cd)

    def side_indices(self, side: str) -> np.ndarray:
        return self.sides[side].nodes

    def side_coordinates(self, side: str) -> np.ndarray:
        return self.sides[side].coords

    def side_points(self, side: str):
        idx = self.side_indices(side)
        return self.mesh.nodes[idx, 0], self.mesh.nodes[idx, 1]


def assemble_fe_block(mesh: Triangulation, eps_field=0.0) -> FeBlock:
    if callable(eps_field):
        eps = np.asarray(eps_field(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float) * np.ones(mesh.n_dof)
    else:
        eps = np.asarray(eps_field, dtype=float) * np.ones(mesh.n_dof)
    M, A = assemble_core(mesh, eps)
    Cd = assemble_directional(mesh)
    sides = {s: assemble_boundary(mesh, s, eps) for s in SIDES if s in mesh.btags}
    return FeBlock(mesh, eps, M, A, Cd, sides)
