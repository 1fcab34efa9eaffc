"""Coupled semi-discrete system over FD and FE blocks.

The system is ``B dw/dt = r(w, t)`` with ``B = blockdiag(H_1, M_2, ...)``.
``r`` is assembled from block operators, boundary penalties and interface
penalties; for a linear flux ``r(w, t) = K w + b(t)`` with sparse ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .interp import (InterpolationPair, build_fd_pair, build_glue_2to1,
                     build_matching_fd_fe)
from .problems import AnalyticSolution, FluxSpec, boundary_data
from .sat_coupling import (AXIS, OPPOSITE, SIDES, InterfaceDescriptor, SatParams,
                           fd_outer_residual, fe_interface_flux, fe_outer_residual,
                           interface_residuals, interface_side)
from .sbp_fd import OUTWARD_NORMAL


def _rect(block):
    return tuple(float(c) for c in block.rect)


def _side_segment(block, side):
    x_l, x_r, y_l, y_r = _rect(block)
    return {"W": (x_l, y_l, y_r), "E": (x_r, y_l, y_r),
            "S": (y_l, x_l, x_r), "N": (y_r, x_l, x_r)}[side]


def find_interfaces(blocks, tol: float = 1e-9):
    """Coincident (left block, E/N side) and (right block, W/S side) pairs."""
    found = []
    for i, bi in enumerate(blocks):
        for j, bj in enumerate(blocks):
            if i == j:
                continue
            for side in ("E", "N"):
                a = _side_segment(bi, side)
                b = _side_segment(bj, OPPOSITE[side])
                if all(abs(p - q) <= tol for p, q in zip(a, b)):
                    found.append((i, side, j, OPPOSITE[side]))
    return found


def build_interface_pair(left, right) -> InterpolationPair:
    """Interpolation pair for two interface sides, chosen by block kinds and
    node counts."""
    kl, kr = left.kind, right.kind
    nl, nr = left.size, right.size
    if kl == "fd" and kr == "fd":
        return build_fd_pair(left.B, right.B)
    if kl == "fd" and kr == "fe":
        return _fd_fe_pair(left, right)
    if kl == "fe" and kr == "fd":
        return _fd_fe_pair(right, left).reversed()
    if nl != nr or np.abs(left.coords - right.coords).max() > 1e-9:
        raise ValueError("FE-FE interfaces must have matching nodes")
    eye = sp.identity(nl, format="csr")
    pair = InterpolationPair(eye, eye.copy(), left.B, right.B, "FE-FE identity")
    if pair.sbp_residual() > 1e-12:
        raise ValueError("FE-FE interface masses differ")
    return pair


def _fd_fe_pair(fd, fe) -> InterpolationPair:
    nc, nf = fd.size, fe.size
    if nc == nf:
        if np.abs(fd.coords - fe.coords).max() > 1e-9:
            raise ValueError("matching FD-FE interface needs coincident nodes")
        return build_matching_fd_fe(fe.B, fd.B)
    if nf == 2 * (nc - 1) + 1:
        return build_glue_2to1(fd.B, fe.B, fd.block.order)
    raise ValueError(f"unsupported FD-FE interface node counts {nc}:{nf}")


@dataclass
class _Face:
    """Outer boundary side with precomputed sample points."""
    block: int
    side: str
    x: np.ndarray
    y: np.ndarray
    eps: np.ndarray


class MultiblockProblem:
    def __init__(self, blocks, flux: FluxSpec, params: SatParams = SatParams(),
                 interfaces=None, solution: AnalyticSolution | None = None,
                 zero_boundary_data: bool = False, ids=None):
        self.blocks = list(blocks)
        self.ids = list(ids) if ids is not None else [str(i) for i in range(len(self.blocks))]
        self.flux = flux
        self.params = params
        self.solution = solution
        self.zero_boundary_data = zero_boundary_data or solution is None
        sizes = [b.N for b in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        if interfaces is None:
            interfaces = find_interfaces(self.blocks)
        self.interfaces = [self._descriptor(it) for it in interfaces]
        used = {(d.left_block, d.left_side) for d in self.interfaces}
        used |= {(d.right_block, d.right_side) for d in self.interfaces}
        self.faces = []
        for k, b in enumerate(self.blocks):
            for s in SIDES:
                if (k, s) in used:
                    continue
                idx = b.side_indices(s)
                X, Y = b.mesh_points()
                self.faces.append(_Face(k, s, X[idx], Y[idx], b.eps[idx]))
        self._sides = {}
        for d in self.interfaces:
            self._sides[id(d)] = (interface_side(self.blocks[d.left_block], d.left_side),
                                  interface_side(self.blocks[d.right_block], d.right_side))
        self._interface_sides = {(d.right_block, d.right_side) for d in self.interfaces}
        self._interface_sides |= {(d.left_block, d.left_side) for d in self.interfaces}
        self._prepare_blocks()
        self._K = None
        self._compiled = None
        self._inv_w = [1.0 / b.weights if b.kind == "fd" else None for b in self.blocks]

    # structure -------------------------------------------------------------

    def _descriptor(self, it):
        if isinstance(it, InterfaceDescriptor):
            return it
        lb, ls, rb, rs = it[:4]
        pair = it[4] if len(it) > 4 else None
        left = interface_side(self.blocks[lb], ls)
        right = interface_side(self.blocks[rb], rs)
        if pair is None:
            pair = build_interface_pair(left, right)
        d = InterfaceDescriptor(lb, ls, rb, rs, pair,
                                self.blocks[lb].eps[self.blocks[lb].side_indices(ls)],
                                self.blocks[rb].eps[self.blocks[rb].side_indices(rs)])
        d.check(left, right)
        return d

    def _prepare_blocks(self):
        self._ops = []
        for b in self.blocks:
            if b.kind == "fd":
                H = b.H
                self._ops.append({"HD": [sp.csr_matrix(H @ b.Dx), sp.csr_matrix(H @ b.Dy)],
                                  "HD2": sp.csr_matrix(H @ (b.D2x + b.D2y))})
            else:
                self._ops.append({})

    @property
    def N(self) -> int:
        return int(self.offsets[-1])

    @property
    def is_linear(self) -> bool:
        return self.flux.is_linear

    def split(self, w):
        return [w[self.offsets[k]:self.offsets[k + 1]] for k in range(len(self.blocks))]

    def join(self, parts):
        if any(sp.issparse(p) for p in parts):
            return sp.csr_matrix(sp.vstack([sp.csr_matrix(p) for p in parts]))
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def h_max(self) -> list:
        return [b.h_max for b in self.blocks]

    def points(self):
        xs, ys = [], []
        for b in self.blocks:
            x, y = b.mesh_points()
            xs.append(x)
            ys.append(y)
        return np.concatenate(xs), np.concatenate(ys)

    # residual ---------------------------------------------------------------

    def _block_operator(self, k, u):
        b = self.blocks[k]
        f = self.flux
        if b.kind == "fd":
            ops = self._ops[k]
            r = ops["HD2"] @ u
            for d in range(2):
                if f.a[d] == 0.0:
                    continue
                HD = ops["HD"][d]
                psi = (1.0 - f.alpha[d]) * f.fprime(u, d) if not f.is_linear else (1.0 - f.alpha[d]) * f.a[d]
                r = r - f.alpha[d] * (HD @ f.f(u, d)) - _scale(psi, HD @ u)
            return r
        r = -(b.A @ u)
        for d in range(2):
            if f.a[d] == 0.0:
                continue
            Cd = b.Cd[d]
            w = 1.0 - f.alpha[d]
            if f.is_linear:
                r = r - (2.0 * w * f.a[d]) * (Cd @ u)
            else:
                fp = f.fprime(u, d)
                r = r - w * (Cd @ (fp * u) + fp * (Cd @ u))
        for s in SIDES:
            if (k, s) in self._interface_sides and b.kind == "fe":
                r = r + fe_interface_flux(b, s, u)
        return r

    def operator_residual(self, w):
        """State-dependent part of ``r(w, t)`` (zero boundary data)."""
        parts = self.split(w)
        res = [self._block_operator(k, parts[k]) for k in range(len(self.blocks))]
        for face in self.faces:
            b = self.blocks[face.block]
            u = parts[face.block]
            if b.kind == "fd":
                res[face.block] = res[face.block] + fd_outer_residual(
                    b, face.side, self.flux, u, None, self.params.tau_for(face.side))
            else:
                res[face.block] = res[face.block] + fe_outer_residual(b, face.side, self.flux, u)
        for d in self.interfaces:
            left, right = self._sides[id(d)]
            rl, rr = interface_residuals(left, right, d.pair, self.flux, self.params,
                                         parts[d.left_block], parts[d.right_block])
            res[d.left_block] = res[d.left_block] + rl
            res[d.right_block] = res[d.right_block] + rr
        return self.join(res)

    def boundary_values(self, t: float):
        """Boundary data per outer face."""
        out = []
        for face in self.faces:
            normal = OUTWARD_NORMAL[face.side]
            if self.zero_boundary_data:
                out.append(np.zeros(len(face.x)))
            else:
                out.append(boundary_data(self.solution, self.flux, face.eps, normal,
                                         face.x, face.y, t))
        return out

    def data_residual(self, t: float):
        """Boundary-data part of ``r(w, t)``."""
        r = np.zeros(self.N)
        if self.zero_boundary_data:
            return r
        for face, g in zip(self.faces, self.boundary_values(t)):
            b = self.blocks[face.block]
            off = self.offsets[face.block]
            if b.kind == "fd":
                idx = b.side_indices(face.side)
                B = b.side_norm(face.side)
                r[off + idx] -= self.params.tau_for(face.side) * (B @ g)
            else:
                bs = b.sides[face.side]
                gb = np.zeros(b.N)
                gb[bs.nodes] = g
                r[off:off + b.N] -= bs.R @ gb
        return r

    def residual(self, w, t: float = 0.0):
        return self.operator_residual(w) + self.data_residual(t)

    # linear operator ------------------------------------------------------

    def linear_operator(self) -> sp.csr_matrix:
        """Sparse ``K`` with ``r(w, t) = K w + b(t)`` (linear flux only)."""
        if not self.is_linear:
            raise TypeError("the flux is nonlinear; linearise it before assembling an operator")
        if self._K is None:
            eye = sp.identity(self.N, format="csr")
            K = self.operator_residual(eye)
            K = sp.csr_matrix(K)
            K.eliminate_zeros()
            self._K = K
        return self._K

    # norms ------------------------------------------------------------------

    def apply_inverse_norm(self, r):
        parts = self.split(r)
        out = []
        for k, b in enumerate(self.blocks):
            if b.kind == "fd":
                out.append(self._inv_w[k] * parts[k])
            else:
                out.append(b.solve_mass(parts[k]))
        return np.concatenate(out)

    def norm_matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.block_diag([b.H if b.kind == "fd" else b.M for b in self.blocks]))

    def block_energies(self, w) -> list:
        out = []
        for b, u in zip(self.blocks, self.split(w)):
            if b.kind == "fd":
                out.append(float(u @ (b.weights * u)))
            else:
                out.append(float(u @ (b.M @ u)))
        return out

    def energy(self, w) -> float:
        return float(sum(self.block_energies(w)))

    def rhs(self, t: float, w):
        """``dw/dt``."""
        if self.is_linear:
            r = self.linear_operator() @ w + self.data_residual(t)
        else:
            r = self.residual(w, t)
        return self.apply_inverse_norm(r)

    def rhs_function(self):
        """A fast closure ``f(t, w)`` equal to :meth:`rhs`."""
        if self._compiled is None:
            self._compiled = _CompiledRhs(self)
        return self._compiled

    # states ----------------------------------------------------------------

    def exact_state(self, t: float):
        if self.solution is None:
            return np.zeros(self.N)
        x, y = self.points()
        return np.asarray(self.solution.value(x, y, t), dtype=float)


class _CompiledRhs:
    """``dw/dt`` from a handful of precomputed sparse products.

    With ``f_d = a_d g(u)`` every convective and interface flux term is
    ``G_f g(w) + g'(w) * (G_p w)``; the remaining pieces are the linear
    operator, the boundary inflow terms and the boundary data map.
    """

    def __init__(self, pb: MultiblockProblem):
        self.pb = pb
        f = pb.flux
        N = pb.N
        scale = np.ones(N)
        self.fe = []
        for k, b in enumerate(pb.blocks):
            sl = slice(pb.offsets[k], pb.offsets[k + 1])
            if b.kind == "fd":
                scale[sl] = pb._inv_w[k]
            else:
                self.fe.append((sl, b))
        S = sp.diags(scale)
        self.linear = f.is_linear
        if f.is_linear:
            self.K = sp.csr_matrix(S @ pb.linear_operator())
        else:
            zero = _ZeroFlux(f)
            saved = pb.flux
            pb.flux = zero
            try:
                K = sp.csr_matrix(pb.operator_residual(sp.identity(N, format="csr")))
            finally:
                pb.flux = saved
            Gf, Gp = _flux_matrices(pb)
            self.K = sp.csr_matrix(S @ K)
            self.Gf = sp.csr_matrix(S @ Gf)
            self.Gp = sp.csr_matrix(S @ Gp)
            self._boundary_maps(S)
        self.D, self.face_pts = _data_map(pb)
        self.D = sp.csr_matrix(S @ self.D)
        self.data = not pb.zero_boundary_data

    def _boundary_maps(self, S):
        pb = self.pb
        N = pb.N
        fd_idx, fd_n, rows, cols, vals = [], [], [], [], []
        fe_idx, fe_n, mblocks = [], [], []
        for face in pb.faces:
            b = pb.blocks[face.block]
            off = pb.offsets[face.block]
            normal = OUTWARD_NORMAL[face.side]
            idx = off + b.side_indices(face.side)
            if b.kind == "fd":
                bw = b.side_norm(face.side).diagonal()
                start = len(fd_idx)
                fd_idx.extend(idx)
                fd_n.extend([normal] * len(idx))
                rows.extend(idx)
                cols.extend(range(start, start + len(idx)))
                vals.extend(pb.params.tau_for(face.side) * bw)
            else:
                fe_idx.extend(idx)
                fe_n.extend([normal] * len(idx))
                mblocks.append(b.sides[face.side].M_I)
        self.fd_idx = np.asarray(fd_idx, dtype=int)
        fd_n = np.asarray(fd_n, dtype=float).reshape(-1, 2)
        self.fd_normal = (fd_n[:, 0], fd_n[:, 1])
        self.Cfd = sp.csr_matrix(S @ sp.csr_matrix((vals, (rows, cols)), shape=(N, len(fd_idx))))
        self.fe_idx = np.asarray(fe_idx, dtype=int)
        fe_n = np.asarray(fe_n, dtype=float).reshape(-1, 2)
        self.fe_normal = (fe_n[:, 0], fe_n[:, 1])
        nf = len(fe_idx)
        if nf:
            Mb = sp.csr_matrix(sp.block_diag(mblocks))
            Lt = sp.csr_matrix((np.ones(nf), (self.fe_idx, np.arange(nf))), shape=(N, nf))
            self.Mb = Mb
            self.LtM = sp.csr_matrix(S @ Lt @ Mb)
            self.Lt = sp.csr_matrix(S @ Lt)

    def __call__(self, t, w):
        if self.linear:
            r = self.K @ w
        else:
            f = self.pb.flux
            r = self.K @ w + self.Gf @ f.shape(w) + f.shape_prime(w) * (self.Gp @ w)
            if len(self.fd_idx):
                r += self.Cfd @ f.characteristic_flux(w[self.fd_idx], self.fd_normal)
            if len(self.fe_idx):
                v = w[self.fe_idx]
                q = f.upwind_weight(v, self.fe_normal)
                q = q - np.abs(q)
                r += 0.5 * (self.LtM @ (q * v) + self.Lt @ (q * (self.Mb @ v)))
        if self.data:
            r += self.D @ _face_data(self.pb, self.face_pts, t)
        for sl, b in self.fe:
            r[sl] = b.solve_mass(r[sl])
        return r


class _ZeroFlux:
    """Linear flux with zero speed and the splitting weights of ``flux``;
    isolates the flux-independent part of the operator."""

    is_linear = True

    def __init__(self, flux):
        self.a = (0.0, 0.0)
        self.alpha = flux.alpha

    def f(self, u, d):
        return 0.0 * u

    def fprime(self, u, d):
        return 0.0

    def characteristic_flux(self, u, normal):
        return 0.0 * u

    def upwind_weight(self, u, normal):
        return 0.0


def _flux_matrices(pb: MultiblockProblem):
    """``G_f`` and ``G_p`` for fluxes of the form ``f_d = a_d g(u)``."""
    f = pb.flux
    N = pb.N
    gf, gp = [], []
    for k, b in enumerate(pb.blocks):
        if b.kind == "fd":
            ops = pb._ops[k]["HD"]
        else:
            ops = b.Cd
        gf.append(-sum(f.alpha[d] * f.a[d] * ops[d] for d in range(2)))
        gp.append(-sum((1.0 - f.alpha[d]) * f.a[d] * ops[d] for d in range(2)))
    Gf = sp.csr_matrix(sp.block_diag(gf))
    Gp = sp.csr_matrix(sp.block_diag(gp))
    p = pb.params
    for d in pb.interfaces:
        left, right = pb._sides[id(d)]
        for own, other, kown, koth, o2o in ((left, right, d.left_block, d.right_block, d.pair.I_L2R),
                                              (right, left, d.right_block, d.left_block, d.pair.I_R2L)):
            a_, b_ = (p.alpha_L, p.beta_L) if own.is_left else (p.alpha_R, p.beta_R)
            ax = own.axis
            X = own.B @ _embed(own.E, pb.offsets[kown], N) \
                - o2o.T @ (other.B @ _embed(other.E, pb.offsets[koth], N))
            Y = _embed_rows(own.E.T @ X, pb.offsets[kown], N)
            Gf = Gf + (a_ * f.alpha[ax] * f.a[ax]) * Y
            Gp = Gp + (b_ * (1.0 - f.alpha[ax]) * f.a[ax]) * Y
    return sp.csr_matrix(Gf), sp.csr_matrix(Gp)


def _embed(E, off, N):
    """Columns of a block trace operator placed in the global state."""
    E = sp.coo_matrix(E)
    return sp.csr_matrix((E.data, (E.row, E.col + off)), shape=(E.shape[0], N))


def _embed_rows(A, off, N):
    A = sp.coo_matrix(A)
    return sp.csr_matrix((A.data, (A.row + off, A.col)), shape=(N, A.shape[1]))


def _data_map(pb: MultiblockProblem):
    """Sparse map from concatenated face data to the residual, plus the
    face sample points with their normals and eps."""
    N = pb.N
    rows, cols, vals = [], [], []
    xs, ys, nx, ny, eps = [], [], [], [], []
    start = 0
    for face in pb.faces:
        b = pb.blocks[face.block]
        off = pb.offsets[face.block]
        idx = b.side_indices(face.side)
        k = len(idx)
        if b.kind == "fd":
            bw = b.side_norm(face.side).diagonal()
            rows.extend(off + idx)
            cols.extend(range(start, start + k))
            vals.extend(-pb.params.tau_for(face.side) * bw)
        else:
            bs = b.sides[face.side]
            M = sp.coo_matrix(bs.M_I)
            rows.extend(off + bs.nodes[M.row])
            cols.extend(start + M.col)
            vals.extend(-M.data)
        n = OUTWARD_NORMAL[face.side]
        xs.append(face.x)
        ys.append(face.y)
        nx.append(np.full(k, float(n[0])))
        ny.append(np.full(k, float(n[1])))
        eps.append(face.eps)
        start += k
    D = sp.csr_matrix((vals, (rows, cols)), shape=(N, start))
    cat = (lambda a: np.concatenate(a) if a else np.zeros(0))
    return D, (cat(xs), cat(ys), cat(nx), cat(ny), cat(eps))


def _face_data(pb: MultiblockProblem, pts, t):
    x, y, nx, ny, eps = pts
    return boundary_data(pb.solution, pb.flux, eps, (nx, ny), x, y, t)


def _scale(w, x):
    if np.isscalar(w) or np.ndim(w) == 0:
        return float(w) * x
    if sp.issparse(x):
        return sp.diags(w) @ x
    return w * x
