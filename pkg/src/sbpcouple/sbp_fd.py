"""Diagonal-norm summation-by-parts finite difference operators.

One-dimensional operators of interior order 2 and 4 are built from exact
rational coefficients. Two-dimensional block operators are Kronecker
products with the y index running fastest, so node (i, j) lives at
``i * m + j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Fr

import numpy as np
import scipy.sparse as sp

# Boundary blocks of the first derivative (rows of h*D1 near the left edge).
_D1_CLOSURE = {
    2: [[Fr(-1), Fr(1)]],
    4: [
        [Fr(-24, 17), Fr(59, 34), Fr(-4, 17), Fr(-3, 34), 0, 0],
        [Fr(-1, 2), 0, Fr(1, 2), 0, 0, 0],
        [Fr(4, 43), Fr(-59, 86), 0, Fr(59, 86), Fr(-4, 43), 0],
        [Fr(3, 98), 0, Fr(-59, 98), 0, Fr(32, 49), Fr(-4, 49)],
    ],
}
_D1_INTERIOR = {
    2: [Fr(-1, 2), 0, Fr(1, 2)],
    4: [Fr(1, 12), Fr(-2, 3), 0, Fr(2, 3), Fr(-1, 12)],
}
_NORM_CLOSURE = {
    2: [Fr(1, 2)],
    4: [Fr(17, 48), Fr(59, 48), Fr(43, 48), Fr(49, 48)],
}
# Constant coefficient second derivative (rows of h^2*D2) and the
# one-sided boundary derivative used with it.
_D2_CLOSURE = {
    4: [
        [2, -5, 4, -1, 0, 0],
        [1, -2, 1, 0, 0, 0],
        [Fr(-4, 43), Fr(59, 43), Fr(-110, 43), Fr(59, 43), Fr(-4, 43), 0],
        [Fr(-1, 49), 0, Fr(59, 49), Fr(-118, 49), Fr(64, 49), Fr(-4, 49)],
    ],
}
_D2_INTERIOR = {4: [Fr(-1, 12), Fr(4, 3), Fr(-5, 2), Fr(4, 3), Fr(-1, 12)]}
_BOUNDARY_DERIVATIVE = {
    2: [Fr(-3, 2), Fr(2), Fr(-1, 2)],
    4: [Fr(-11, 6), Fr(3), Fr(-3, 2), Fr(1, 3)],
}

SUPPORTED_ORDERS = (2, 4)


def _closure_width(order: int) -> int:
    return len(_NORM_CLOSURE[order])


def _banded(n, closure, interior, h_scale, odd):
    """Assemble a matrix from a left closure, an interior stencil and the
    mirrored right closure. ``odd`` flips the sign of the mirrored block."""
    mat = np.zeros((n, n))
    half = len(interior) // 2
    nb = len(closure)
    for i in range(nb, n - nb):
        for k, c in enumerate(interior):
            mat[i, i - half + k] = float(c)
    sign = -1.0 if odd else 1.0
    for i, row in enumerate(closure):
        for j, c in enumerate(row):
            mat[i, j] = float(c)
            mat[n - 1 - i, n - 1 - j] = sign * float(c)
    return mat / h_scale


@dataclass(frozen=True)
class SbpOperators1D:
    """First derivative operator ``D1 = H^{-1} Q`` plus the data needed for
    the compatible second derivative."""

    order: int
    n: int
    h: float
    H: sp.dia_matrix
    Q: sp.csr_matrix
    D1: sp.csr_matrix
    e_first: np.ndarray
    e_last: np.ndarray
    d_first: np.ndarray
    d_last: np.ndarray
    _d2_const: np.ndarray = field(repr=False, default=None)

    @property
    def weights(self) -> np.ndarray:
        return self.H.diagonal()

    def second_derivative(self, b):
        return build_second_derivative(self, b)


def build_sbp_1d(order: int, n: int, h: float) -> SbpOperators1D:
    """Build diagonal-norm SBP operators on ``n`` equidistant points.

    Args:
        order: interior accuracy, 2 or 4.
        n: number of grid points.
        h: grid spacing.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported SBP order {order}; choose from {SUPPORTED_ORDERS}")
    width = max(_closure_width(order), len(_BOUNDARY_DERIVATIVE[order]))
    need = 2 * width + 1 if order > 2 else 3
    if n < need:
        raise ValueError(f"order {order} needs at least {need} points, got {n}")
    if not h > 0:
        raise ValueError("grid spacing must be positive")

    w = np.ones(n)
    nc = _NORM_CLOSURE[order]
    w[: len(nc)] = [float(c) for c in nc]
    w[n - len(nc):] = w[: len(nc)][::-1]
    H = sp.diags(h * w)

    # Q = H D1 is formed in rationals so that Q + Q^T is exact
    q_closure = [[nc[i] * c for c in row] for i, row in enumerate(_D1_CLOSURE[order])]
    Q = _banded(n, q_closure, _D1_INTERIOR[order], 1.0, odd=True)
    D1 = sp.csr_matrix(Q / (h * w)[:, None])

    bd = np.zeros(n)
    coeffs = [float(c) for c in _BOUNDARY_DERIVATIVE[order]]
    bd[: len(coeffs)] = coeffs
    d_first = bd / h
    d_last = -bd[::-1] / h

    d2c = None
    if order in _D2_CLOSURE:
        d2c = _banded(n, _D2_CLOSURE[order], _D2_INTERIOR[order], h * h, odd=False)

    e_first = np.zeros(n)
    e_first[0] = 1.0
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    return SbpOperators1D(order, n, h, H, sp.csr_matrix(Q), D1, e_first, e_last,
                          d_first, d_last, d2c)


def second_derivative_family(ops: SbpOperators1D, constant: bool) -> str:
    """Name the closure used by :func:`build_second_derivative`."""
    if ops.order == 2:
        return "narrow"
    return "narrow" if constant else "wide"


def build_second_derivative(ops: SbpOperators1D, b, family: str | None = None):
    """Second derivative ``D2 = H^{-1}(-A - b_1 e_1 d_1 + b_n e_n d_n)``.

    Order 2 uses the narrow variable coefficient stencil. Order 4 uses the
    narrow constant coefficient operator when ``b`` is constant and falls
    back to ``D1 diag(b) D1`` otherwise.

    Returns:
        ``(D2, A, d_first, d_last)``; the boundary derivative rows are the
        ones that make the SBP identity hold for the returned pair.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (ops.n,):
        raise ValueError(f"coefficient vector must have length {ops.n}")
    if np.any(b < 0) or not np.all(np.isfinite(b)):
        raise ValueError("coefficient vector must be finite and non-negative")
    if family is None:
        family = second_derivative_family(ops, bool(np.all(b == b[0])))
    n, h = ops.n, ops.h
    w = ops.weights

    if family == "wide":
        d_first = ops.D1.getrow(0).toarray().ravel()
        d_last = ops.D1.getrow(n - 1).toarray().ravel()
        A = ops.D1.T @ sp.diags(w * b) @ ops.D1
    elif ops.order == 2:
        d_first, d_last = ops.d_first, ops.d_last
        bm = 0.5 * (b[:-1] + b[1:]) / h
        main = np.zeros(n)
        main[:-1] += bm
        main[1:] += bm
        A = sp.diags([-bm, main, -bm], [-1, 0, 1])
    else:
        d_first, d_last = ops.d_first, ops.d_last
        c = b[0]
        a_const = (-np.diag(w) @ ops._d2_const - np.outer(ops.e_first, d_first)
                   + np.outer(ops.e_last, d_last))
        a_const = 0.5 * (a_const + a_const.T)
        A = sp.csr_matrix(c * a_const)
    A = sp.csr_matrix(A)
    A.eliminate_zeros()
    bnd = (-b[0] * np.outer(ops.e_first, d_first) + b[-1] * np.outer(ops.e_last, d_last))
    D2 = sp.diags(1.0 / w) @ (-A + sp.csr_matrix(bnd))
    return sp.csr_matrix(D2), A, d_first, d_last


_SIDES = ("N", "E", "S", "W")
OUTWARD_NORMAL = {"N": (0.0, 1.0), "E": (1.0, 0.0), "S": (0.0, -1.0), "W": (-1.0, 0.0)}


@dataclass
class FdBlock:
    """Finite difference block on an ``n x m`` grid over a rectangle."""

    rect: tuple
    n: int
    m: int
    order: int
    ops_x: SbpOperators1D
    ops_y: SbpOperators1D
    eps: np.ndarray
    x: np.ndarray
    y: np.ndarray
    H: sp.dia_matrix
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    D2x: sp.csr_matrix
    D2y: sp.csr_matrix
    # boundary derivative rows (1D) matching the second derivative closures
    dx_first: np.ndarray = None
    dx_last: np.ndarray = None
    dy_first: np.ndarray = None
    dy_last: np.ndarray = None
    kind: str = "fd"

    @property
    def N(self) -> int:
        return self.n * self.m

    @property
    def hx(self) -> float:
        return self.ops_x.h

    @property
    def hy(self) -> float:
        return self.ops_y.h

    @property
    def h_max(self) -> float:
        # the step size rule measures grid size as 1/(points - 1)
        return 1.0 / (min(self.n, self.m) - 1)

    @property
    def weights(self) -> np.ndarray:
        return self.H.diagonal()

    def side_indices(self, side: str) -> np.ndarray:
        n, m = self.n, self.m
        if side == "W":
            return np.arange(m)
        if side == "E":
            return (n - 1) * m + np.arange(m)
        if side == "S":
            return np.arange(n) * m
        if side == "N":
            return np.arange(n) * m + m - 1
        raise ValueError(f"unknown side {side!r}")

    def side_coordinates(self, side: str) -> np.ndarray:
        return self.y.copy() if side in ("W", "E") else self.x.copy()

    def side_points(self, side: str):
        idx = self.side_indices(side)
        X, Y = self.mesh_points()
        return X[idx], Y[idx]

    def trace(self, side: str) -> sp.csr_matrix:
        idx = self.side_indices(side)
        k = len(idx)
        return sp.csr_matrix((np.ones(k), (np.arange(k), idx)), shape=(k, self.N))

    def side_norm(self, side: str) -> sp.dia_matrix:
        return self.ops_y.H if side in ("W", "E") else self.ops_x.H

    def axis_derivative_trace(self, side: str) -> sp.csr_matrix:
        """Derivative along the side's normal axis (not the outward normal),
        evaluated with the boundary rows of the second derivative."""
        In = sp.identity(self.n, format="csr")
        Im = sp.identity(self.m, format="csr")
        row = {"W": self.dx_first, "E": self.dx_last,
               "S": self.dy_first, "N": self.dy_last}[side]
        row = sp.csr_matrix(row[None, :])
        if side in ("W", "E"):
            return sp.csr_matrix(sp.kron(row, Im))
        return sp.csr_matrix(sp.kron(In, row))

    def mesh_points(self):
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return X.ravel(), Y.ravel()


def assemble_fd_block(rect, n: int, m: int, order: int, eps_field=0.0) -> FdBlock:
    """Assemble 2D SBP operators on ``rect = (x_l, x_r, y_l, y_r)``.

    ``eps_field`` may be a scalar, an array of length ``n*m`` or a callable
    ``eps(x, y)``.
    """
    x_l, x_r, y_l, y_r = map(float, rect)
    if not (x_r > x_l and y_r > y_l):
        raise ValueError(f"degenerate rectangle {rect}")
    x = np.linspace(x_l, x_r, n)
    y = np.linspace(y_l, y_r, m)
    ops_x = build_sbp_1d(order, n, (x_r - x_l) / (n - 1))
    ops_y = build_sbp_1d(order, m, (y_r - y_l) / (m - 1))
    X, Y = np.meshgrid(x, y, indexing="ij")
    if callable(eps_field):
        eps = np.asarray(eps_field(X.ravel(), Y.ravel()), dtype=float) * np.ones(n * m)
    else:
        eps = np.asarray(eps_field, dtype=float) * np.ones(n * m)
    if eps.shape != (n * m,):
        raise ValueError("eps field has wrong size")
    if not np.all(np.isfinite(eps)) or np.any(eps < 0):
        raise ValueError("eps must be finite and non-negative")

    In = sp.identity(n, format="csr")
    Im = sp.identity(m, format="csr")
    Dx = sp.csr_matrix(sp.kron(ops_x.D1, Im))
    Dy = sp.csr_matrix(sp.kron(In, ops_y.D1))
    H = sp.diags(np.kron(ops_x.weights, ops_y.weights))

    E = eps.reshape(n, m)
    constant = bool(np.all(eps == eps[0]))
    fam_x = second_derivative_family(ops_x, constant)
    fam_y = second_derivative_family(ops_y, constant)

    # x-direction: one operator per grid line of constant y
    rows, cols, vals = [], [], []
    dx_first = dx_last = None
    for j in range(m):
        D2, _, dfx, dlx = build_second_derivative(ops_x, E[:, j], fam_x)
        c = D2.tocoo()
        rows.append(c.row * m + j)
        cols.append(c.col * m + j)
        vals.append(c.data)
        dx_first, dx_last = dfx, dlx
    D2x = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n * m, n * m))
    blocks = []
    dy_first = dy_last = None
    for i in range(n):
        D2, _, dfy, dly = build_second_derivative(ops_y, E[i, :], fam_y)
        blocks.append(D2)
        dy_first, dy_last = dfy, dly
    D2y = sp.csr_matrix(sp.block_diag(blocks))
    return FdBlock((x_l, x_r, y_l, y_r), n, m, order, ops_x, ops_y, eps, x, y, H,
                   Dx, Dy, D2x, D2y, dx_first, dx_last, dy_first, dy_last)


def write_triplets(matrix, path) -> None:
    """Dump a matrix as ``row col value`` lines."""
    c = sp.coo_matrix(matrix)
    order = np.lexsort((c.col, c.row))
    with open(path, "w") as fh:
        for r, col, v in zip(c.row[order], c.col[order], c.data[order]):
            fh.write(f"{r} {col} {v:.17g}\n")
