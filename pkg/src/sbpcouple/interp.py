"""Norm-compatible interpolation between interface grids.

A pair ``(I_L2R, I_R2L)`` between interfaces with norms ``B_L`` and ``B_R``
is SBP preserving when ``B_R I_L2R = I_R2L^T B_L``. Pairs involving the
consistent P1 interface mass are composed from a diagonal-norm pair and the
lumped-to-consistent pair ``(I, B_lumped^{-1} M_I)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.optimize as so
import scipy.sparse as sp

from .sbp_fd import build_sbp_1d


@dataclass
class InterpolationPair:
    I_L2R: sp.csr_matrix       # m_R x m_L
    I_R2L: sp.csr_matrix       # m_L x m_R
    norm_L: sp.csr_matrix
    norm_R: sp.csr_matrix
    label: str = ""

    @property
    def shape(self):
        return self.I_L2R.shape

    def reversed(self) -> "InterpolationPair":
        return InterpolationPair(self.I_R2L, self.I_L2R, self.norm_R, self.norm_L,
                                 self.label + " (reversed)")

    def sbp_residual(self) -> float:
        r = self.norm_R @ self.I_L2R - self.I_R2L.T @ self.norm_L
        scale = max(abs(self.norm_L).max(), abs(self.norm_R).max())
        return float(abs(r).max() / scale) if r.nnz else 0.0


def _csr(a):
    m = sp.csr_matrix(a)
    m.eliminate_zeros()
    return m


def pair_from_left(I_L2R, norm_L, norm_R, label="") -> InterpolationPair:
    """Complete a pair from ``I_L2R`` when ``norm_L`` is diagonal."""
    wl = sp.csr_matrix(norm_L).diagonal()
    I_R2L = sp.diags(1.0 / wl) @ sp.csr_matrix(I_L2R).T @ sp.csr_matrix(norm_R)
    return InterpolationPair(_csr(I_L2R), _csr(I_R2L), _csr(norm_L), _csr(norm_R), label)


def compose(a2b: InterpolationPair, b2c: InterpolationPair, label="") -> InterpolationPair:
    """Chain two pairs through a shared middle layer."""
    return InterpolationPair(_csr(b2c.I_L2R @ a2b.I_L2R), _csr(a2b.I_R2L @ b2c.I_R2L),
                             a2b.norm_L, b2c.norm_R, label or f"{a2b.label} + {b2c.label}")


def identity_pair(norm, label="identity") -> InterpolationPair:
    n = norm.shape[0]
    eye = sp.identity(n, format="csr")
    return InterpolationPair(eye, eye.copy(), _csr(norm), _csr(norm), label)


def lumped_weights(M_I) -> np.ndarray:
    return np.asarray(sp.csr_matrix(M_I).sum(axis=1)).ravel()


def lumped_to_consistent(M_I) -> InterpolationPair:
    """Pair between the lumped layer (left) and the consistent mass (right)."""
    M_I = sp.csr_matrix(M_I)
    w = lumped_weights(M_I)
    n = M_I.shape[0]
    return InterpolationPair(sp.identity(n, format="csr"), _csr(sp.diags(1.0 / w) @ M_I),
                             _csr(sp.diags(w)), M_I, "lumped-consistent")


class InfeasibleClosure(ValueError):
    pass


def constrained_closure(template, mask, x_L, w_L, x_R, w_R, deg_L2R: int, deg_R2L: int, h=1.0):
    """Fill the free entries of ``I_L2R`` by least squares.

    Every row of ``I_L2R`` with a free entry must be exact for polynomials
    up to ``deg_L2R``; every row of ``I_R2L = W_L^{-1} I_L2R^T W_R`` built
    from a column with a free entry must be exact up to ``deg_R2L``. Among
    all solutions the one closest to the template is returned.
    """
    T = np.asarray(template, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    pos = np.argwhere(mask)
    col_of = {tuple(p): k for k, p in enumerate(pos)}
    base = T.copy()
    base[mask] = 0.0
    rows, rhs = [], []
    for r in sorted(set(pos[:, 0])):
        for k in range(deg_L2R + 1):
            basis = ((x_L - x_R[r]) / h) ** k
            a = np.zeros(len(pos))
            for j in np.nonzero(mask[r])[0]:
                a[col_of[(r, j)]] = basis[j]
            rows.append(a)
            rhs.append(float(k == 0) - base[r] @ basis)
    for i in sorted(set(pos[:, 1])):
        for k in range(deg_R2L + 1):
            basis = ((x_R - x_L[i]) / h) ** k * w_R / w_L[i]
            a = np.zeros(len(pos))
            for r in np.nonzero(mask[:, i])[0]:
                a[col_of[(r, i)]] = basis[r]
            rows.append(a)
            rhs.append(float(k == 0) - base[:, i] @ basis)
    A = np.asarray(rows)
    b = np.asarray(rhs)
    z0 = T[mask]
    z = z0 + np.linalg.lstsq(A, b - A @ z0, rcond=None)[0]
    if np.abs(A @ z - b).max() > 1e-11:
        raise InfeasibleClosure(f"accuracy constraints (degrees {deg_L2R}, {deg_R2L}) are inconsistent")
    X = base
    X[mask] = z
    return X, A


def diagonal_2to1(w_coarse, w_fine, x_coarse=None, x_fine=None) -> InterpolationPair:
    """Second-order pair between a coarse diagonal norm (left) and a fine
    diagonal norm with twice the resolution (right).

    Fine nodes that coincide with coarse nodes get injected values, the
    others the average of their neighbours. Rows next to the ends are left
    free and re-fitted; for trapezoidal norms the fit returns the template.
    """
    w_c = np.asarray(w_coarse, dtype=float)
    w_f = np.asarray(w_fine, dtype=float)
    nc, nf = len(w_c), len(w_f)
    if nf != 2 * (nc - 1) + 1:
        raise ValueError(f"fine interface must have {2 * (nc - 1) + 1} nodes, got {nf}")
    if x_coarse is None:
        x_coarse = np.linspace(0.0, 1.0, nc)
    if x_fine is None:
        x_fine = np.linspace(x_coarse[0], x_coarse[-1], nf)
    T = np.zeros((nf, nc))
    for i in range(nc):
        T[2 * i, i] = 1.0
    for i in range(nc - 1):
        T[2 * i + 1, i] = T[2 * i + 1, i + 1] = 0.5
    mask = np.zeros_like(T, dtype=bool)
    k = min(2, nc // 2)
    mask[: 2 * k + 1, :k + 1] = T[: 2 * k + 1, :k + 1] != 0
    mask[nf - 2 * k - 1:, nc - k - 1:] = T[nf - 2 * k - 1:, nc - k - 1:] != 0
    hc = x_coarse[1] - x_coarse[0]
    X, _ = constrained_closure(T, mask, x_coarse, w_c, x_fine, w_f, 1, 0, hc)
    return pair_from_left(X, sp.diags(w_c), sp.diags(w_f), "diagonal 2:1")


def _reference_norm(order, n):
    return build_sbp_1d(order, n, 1.0 / (n - 1)).weights


_CLOSURE_SPILL = 0


@lru_cache(maxsize=None)
def _same_grid_closure(order: int, refine: int) -> np.ndarray:
    """Closure block of the same-grid pair from an order-``order`` diagonal
    norm to the second-order norm.

    Constants are reproduced exactly both ways. Linears cannot be (the two
    norms have different boundary moment defects), so the linear residual
    is minimised subject to the characteristic (Sylvester) conditions of
    the composite with the consistent interface mass."""
    ops = build_sbp_1d(order, 13, 1.0)
    k = len([w for w in ops.weights if w != 1.0]) // 2
    s = _CLOSURE_SPILL
    w_q = ops.weights[:k + s]
    w_2 = np.ones(k)
    w_2[0] = 0.5
    # k rows spill s columns into the interior; conditions are
    # X x^j = x^j and W_q^{-1} X^T W_2 x^j = x^j
    xs = np.arange(k + s, dtype=float)

    def conditions(j):
        rows, rhs = [], []
        for r in range(k):
            a = np.zeros((k, k + s))
            a[r, :] = xs ** j
            rows.append(a.ravel())
            rhs.append(xs[r] ** j)
        for i in range(k + s):
            a = np.zeros((k, k + s))
            a[:, i] = w_2 * xs[:k] ** j
            rows.append(a.ravel())
            rhs.append(w_q[i] * xs[i] ** j if i < k else 0.0)
        return np.asarray(rows), np.asarray(rhs)

    A, b = conditions(0)
    A1, b1 = conditions(1)
    c0 = np.eye(k, k + s).ravel()
    c0 = c0 + np.linalg.lstsq(A, b - A @ c0, rcond=None)[0]
    null = sla.null_space(A)
    y0 = np.linalg.lstsq(A1 @ null, b1 - A1 @ c0, rcond=None)[0]

    nc = 13
    hc = 1.0 / (nc - 1)
    w_qn = _reference_norm(order, nc)
    w_2n = np.full(nc, hc)
    w_2n[[0, -1]] *= 0.5
    xc = np.linspace(0, 1, nc)
    if refine == 1:
        tail = lumped_to_consistent(_p1_interface_mass(xc))
    else:
        xf = np.linspace(0, 1, refine * (nc - 1) + 1)
        mid = diagonal_2to1(w_2n, lumped_weights(_p1_interface_mass(xf)), xc, xf)
        tail = compose(mid, lumped_to_consistent(_p1_interface_mass(xf)))

    # dense copies: the objective is evaluated thousands of times
    T_L2R, T_R2L = tail.I_L2R.toarray(), tail.I_R2L.toarray()
    BR = tail.norm_R.toarray()
    BL = np.diag(w_qn)

    def objective(y):
        c = c0 + null @ y
        X = _closure_matrix(c.reshape(k, k + s), nc)
        L2R = T_L2R @ X
        R2L = (X.T * (w_2n / w_qn[:, None])) @ T_R2L
        S1 = BL - BL @ R2L @ L2R
        S2 = BR - BR @ L2R @ R2L
        syl = min(np.linalg.eigvalsh(0.5 * (S1 + S1.T))[0], np.linalg.eigvalsh(0.5 * (S2 + S2.T))[0])
        gap = min(syl / hc - 1e-8, 0.0)
        return float(np.sum((A1 @ c - b1) ** 2)) + 1e4 * gap * gap

    res = so.minimize(objective, y0, method="Nelder-Mead",
                      options={"maxiter": 20000, "maxfev": 20000, "xatol": 1e-12, "fatol": 1e-15})
    return (c0 + null @ res.x).reshape(k, k + s)


def _closure_matrix(C, n: int) -> np.ndarray:
    k, c = C.shape
    if n < 2 * c:
        raise ValueError(f"interface needs at least {2 * c} nodes for this closure")
    X = np.eye(n)
    X[:k, :c] = C
    X[n - k:, n - c:] = C[::-1, ::-1]
    return X


def _closure_pair(C, w_q, w_2) -> InterpolationPair:
    X = _closure_matrix(C, len(w_q))
    return pair_from_left(X, sp.diags(w_q), sp.diags(w_2), "same-grid")


def same_grid_pair(w_q, refine=1) -> InterpolationPair:
    """Pair from a higher order diagonal norm ``w_q`` (left) to the
    second-order norm on the same nodes (right)."""
    w_q = np.asarray(w_q, dtype=float)
    n = len(w_q)
    h = w_q[n // 2]
    w_2 = np.full(n, h)
    w_2[[0, -1]] *= 0.5
    if np.allclose(w_q, w_2, rtol=0, atol=1e-14 * h):
        return identity_pair(sp.diags(w_q), "identity")
    order = _detect_order(w_q / h)
    C = _same_grid_closure(order, refine)
    return _closure_pair(C, w_q, w_2)


def _detect_order(w):
    for order in (2, 4):
        ref = build_sbp_1d(order, len(w), 1.0).weights
        if np.allclose(w, ref, atol=1e-12):
            return order
    raise ValueError("interface norm is not a supported FD norm")


def _p1_interface_mass(x):
    h = np.diff(x)
    n = len(x)
    main = np.zeros(n)
    main[:-1] += h / 3.0
    main[1:] += h / 3.0
    return sp.csr_matrix(sp.diags([h / 6.0, main, h / 6.0], [-1, 0, 1]))


def build_matching_fd_fe(M_I, H) -> InterpolationPair:
    """Pair between an FD interface (left, diagonal norm ``H``) and a P1
    interface with the same nodes (right, consistent mass ``M_I``)."""
    M_I = sp.csr_matrix(M_I)
    H = sp.csr_matrix(H)
    if M_I.shape != H.shape:
        raise ValueError(f"size mismatch: M_I {M_I.shape}, H {H.shape}")
    w = H.diagonal()
    if np.allclose(w, lumped_weights(M_I), rtol=0, atol=1e-13 * w.max()):
        pair = lumped_to_consistent(M_I)
        pair.norm_L = sp.csr_matrix(H)
        pair.label = "matching FD-FE"
        return pair
    return compose(same_grid_pair(w), lumped_to_consistent(M_I), "matching FD-FE")


def build_glue_2to1(H_coarse, M_I_fine, order: int = 2) -> InterpolationPair:
    """Pair between a coarse FD interface (left) and a P1 interface with
    twice the resolution (right)."""
    H_coarse = sp.csr_matrix(H_coarse)
    M_I_fine = sp.csr_matrix(M_I_fine)
    nc, nf = H_coarse.shape[0], M_I_fine.shape[0]
    if nf != 2 * (nc - 1) + 1:
        raise ValueError(f"fine interface must have {2 * (nc - 1) + 1} nodes, got {nf}")
    if order not in (2, 4):
        raise ValueError("2:1 glue is available for orders 2 and 4")
    w_c = H_coarse.diagonal()
    h = w_c[nc // 2]
    w_2 = np.full(nc, h)
    w_2[[0, -1]] *= 0.5
    w_f = lumped_weights(M_I_fine)
    mid = diagonal_2to1(w_2, w_f)
    tail = compose(mid, lumped_to_consistent(M_I_fine), "2:1 glue")
    if order == 2:
        tail.label = "2:1 glue"
        return tail
    C = _same_grid_closure(_detect_order(w_c / h), 2)
    return compose(_closure_pair(C, w_c, w_2), tail, "2:1 glue")


def build_fd_pair(H_L, H_R) -> InterpolationPair:
    """Pair between two diagonal FD interface norms (matching or 2:1)."""
    wl = sp.csr_matrix(H_L).diagonal()
    wr = sp.csr_matrix(H_R).diagonal()
    if len(wl) == len(wr):
        if not np.allclose(wl, wr, rtol=1e-12):
            raise ValueError("matching FD interfaces need equal norms")
        return identity_pair(sp.diags(wl))
    if len(wr) == 2 * (len(wl) - 1) + 1:
        return diagonal_2to1(wl, wr)
    if len(wl) == 2 * (len(wr) - 1) + 1:
        return diagonal_2to1(wr, wl).reversed()
    raise ValueError(f"unsupported interface ratio {len(wl)}:{len(wr)}")


def sylvester_minima(pair: InterpolationPair):
    """Smallest eigenvalues of ``B_L (I - I_R2L I_L2R)`` and
    ``B_R (I - I_L2R I_R2L)`` after symmetrisation."""
    BL = pair.norm_L.toarray()
    BR = pair.norm_R.toarray()
    L2R = pair.I_L2R.toarray()
    R2L = pair.I_R2L.toarray()
    S1 = BL - BL @ R2L @ L2R
    S2 = BR - BR @ L2R @ R2L
    return (float(np.linalg.eigvalsh(0.5 * (S1 + S1.T)).min()),
            float(np.linalg.eigvalsh(0.5 * (S2 + S2.T)).min()))


@dataclass
class PairReport:
    sbp_residual: float
    errors: dict = field(default_factory=dict)       # degree -> (L2R err, R2L err)
    sylvester: tuple = (0.0, 0.0)
    row_sum_error: float = 0.0
    tol_sbp: float = 1e-12
    tol_psd: float = -1e-10

    @property
    def checks(self):
        scale = 1.0
        return {
            "sbp identity": self.sbp_residual <= self.tol_sbp,
            "constants preserved": self.row_sum_error <= 1e-13 * scale + 1e-13,
            "sylvester left": self.sylvester[0] >= self.tol_psd,
            "sylvester right": self.sylvester[1] >= self.tol_psd,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def lines(self):
        out = [f"  sbp residual          {self.sbp_residual:.3e}",
               f"  row sum error         {self.row_sum_error:.3e}",
               f"  sylvester minima      {self.sylvester[0]:.3e} {self.sylvester[1]:.3e}"]
        for d, (e1, e2) in sorted(self.errors.items()):
            out.append(f"  degree {d} error        {e1:.3e} {e2:.3e}")
        return out


def verify_pair(pair: InterpolationPair, x_L=None, x_R=None, degrees=(0, 1, 2)) -> PairReport:
    nR, nL = pair.shape
    if x_L is None:
        x_L = np.linspace(0.0, 1.0, nL)
    if x_R is None:
        x_R = np.linspace(x_L[0], x_L[-1], nR)
    errs = {}
    for d in degrees:
        e1 = float(np.abs(pair.I_L2R @ x_L ** d - x_R ** d).max())
        e2 = float(np.abs(pair.I_R2L @ x_R ** d - x_L ** d).max())
        errs[d] = (e1, e2)
    rs = max(np.abs(pair.I_L2R @ np.ones(nL) - 1).max(), np.abs(pair.I_R2L @ np.ones(nR) - 1).max())
    scale = max(pair.norm_L.diagonal().max(), pair.norm_R.diagonal().max())
    syl = tuple(s / scale for s in sylvester_minima(pair))
    return PairReport(pair.sbp_residual(), errs, syl, float(rs))
